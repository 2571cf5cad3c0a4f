#include "vocab.hpp"

#include "errors.hpp"

namespace pgrpo {

Vocabulary::Vocabulary(int n_max) : n_max_(n_max) {
  if (n_max < 8) throw ContractError("vocabulary requires n_max >= 8");
}

int Vocabulary::sample_token(int j) const {
  if (j < 1 || j > n_max_) throw ContractError("sample index out of range");
  return kDigitBase + 10 + (j - 1);
}

int Vocabulary::cite_token(int j) const {
  if (j < 1 || j > n_max_) throw ContractError("citation index out of range");
  return kDigitBase + 10 + n_max_ + (j - 1);
}

int Vocabulary::digit_token(int d) const {
  if (d < 0 || d > 9) throw ContractError("digit out of range");
  return kDigitBase + d;
}

bool Vocabulary::is_sample(int id) const {
  return id >= kDigitBase + 10 && id < kDigitBase + 10 + n_max_;
}

bool Vocabulary::is_cite(int id) const {
  return id >= kDigitBase + 10 + n_max_ && id < size();
}

bool Vocabulary::is_digit(int id) const {
  return id >= kDigitBase && id < kDigitBase + 10;
}

int Vocabulary::sample_index(int id) const {
  return is_sample(id) ? id - (kDigitBase + 10) + 1 : 0;
}

int Vocabulary::cite_index(int id) const {
  return is_cite(id) ? id - (kDigitBase + 10 + n_max_) + 1 : 0;
}

int Vocabulary::digit_value(int id) const {
  return is_digit(id) ? id - kDigitBase : -1;
}

std::string Vocabulary::token_name(int id) const {
  switch (id) {
    case kAnalysisBegin: return "<A>";
    case kAnalysisEnd: return "</A>";
    case kConclusionBegin: return "<C>";
    case kConclusionEnd: return "</C>";
    case kAnswerBegin: return "<F>";
    case kAnswerEnd: return "</F>";
    case kHelpful: return "HLP";
    case kUnhelpful: return "UNH";
    case kNoAnswer: return "NOANS";
    default: break;
  }
  if (is_digit(id)) return "a" + std::to_string(digit_value(id));
  if (is_sample(id)) return "S" + std::to_string(sample_index(id));
  if (is_cite(id)) return "R" + std::to_string(cite_index(id));
  throw ContractError("unknown token id " + std::to_string(id));
}

std::string Vocabulary::manifest() const {
  std::string out;
  for (int id = 0; id < size(); ++id) {
    out += token_name(id);
    out += '\t';
    out += std::to_string(id);
    out += '\n';
  }
  return out;
}

std::uint64_t Vocabulary::manifest_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : manifest()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pgrpo
