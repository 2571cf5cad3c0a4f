#pragma once

#include <cstdint>
#include <string>

namespace pgrpo {

// Token vocabulary of the structured chain-of-thought grammar:
//
//   <A> S1 (HLP|UNH) ... Sn (HLP|UNH) </A> <C> {Rj}* </C> <F> (a0..a9|NOANS) </F>
//
// Ids are assigned by a fixed layout so that the same n_max always produces
// the same vocabulary. `manifest()` publishes the name<TAB>id table; its hash
// is recorded in policy checkpoints so serialized trajectories stay bit-stable
// across runs.
class Vocabulary {
 public:
  static constexpr int kAnalysisBegin = 0;   // <A>
  static constexpr int kAnalysisEnd = 1;     // </A>
  static constexpr int kConclusionBegin = 2; // <C>
  static constexpr int kConclusionEnd = 3;   // </C>
  static constexpr int kAnswerBegin = 4;     // <F>
  static constexpr int kAnswerEnd = 5;       // </F>
  static constexpr int kHelpful = 6;         // HLP
  static constexpr int kUnhelpful = 7;       // UNH
  static constexpr int kNoAnswer = 8;        // NOANS
  static constexpr int kDigitBase = 9;       // a0..a9

  explicit Vocabulary(int n_max = kDefaultMaxSamples);

  static constexpr int kDefaultMaxSamples = 8;

  int max_samples() const { return n_max_; }
  int size() const { return kDigitBase + 10 + 2 * n_max_; }

  int sample_token(int j) const;   // S(j), 1-based
  int cite_token(int j) const;     // R(j), 1-based
  int digit_token(int d) const;    // a0..a9

  bool is_sample(int id) const;
  bool is_cite(int id) const;
  bool is_digit(int id) const;
  bool is_judgment(int id) const { return id == kHelpful || id == kUnhelpful; }
  bool is_answer(int id) const { return id == kNoAnswer || is_digit(id); }
  bool valid_id(int id) const { return id >= 0 && id < size(); }

  // 1-based sample/citation index; 0 when the token is not of that kind.
  int sample_index(int id) const;
  int cite_index(int id) const;
  int digit_value(int id) const;  // -1 when not a digit token

  std::string token_name(int id) const;
  // One "token_name<TAB>id" line per token, in id order.
  std::string manifest() const;
  // FNV-1a over the manifest text.
  std::uint64_t manifest_hash() const;

 private:
  int n_max_;
};

}  // namespace pgrpo
