#include "grammar.hpp"

#include <algorithm>

#include "errors.hpp"

namespace pgrpo {

const char* parse_status_name(ParseStatus s) {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kMissingMarker: return "missing_marker";
    case ParseStatus::kWrongSampleOrder: return "wrong_sample_order";
    case ParseStatus::kDuplicateCitation: return "duplicate_citation";
    case ParseStatus::kCitationOrder: return "citation_order";
    case ParseStatus::kCitationOutOfRange: return "citation_out_of_range";
    case ParseStatus::kUnexpectedToken: return "unexpected_token";
    case ParseStatus::kTrailingTokens: return "trailing_tokens";
    case ParseStatus::kTruncated: return "truncated";
  }
  return "unknown";
}

namespace {

ParseResult fail(ParseStatus code, int position, std::string detail) {
  ParseResult r;
  r.failure = ParseFailure{code, position, std::move(detail)};
  return r;
}

std::string name_of(const Vocabulary& vocab, int id) {
  return vocab.valid_id(id) ? vocab.token_name(id) : ("#" + std::to_string(id));
}

// Shared implementation; sample_count < 0 means "infer from the analysis".
ParseResult parse_impl(const Vocabulary& vocab, std::span<const int> tokens,
                       int sample_count) {
  const int len = static_cast<int>(tokens.size());
  if (sample_count == 0 || sample_count > vocab.max_samples())
    throw ContractError("sample count out of range for vocabulary");

  int pos = 0;
  auto truncated = [&] {
    return fail(ParseStatus::kTruncated, len, "input ends mid-completion");
  };
  auto at_end = [&] { return pos >= len; };

  ParsedCompletion out;

  // <A>
  if (at_end()) return truncated();
  if (tokens[pos] != Vocabulary::kAnalysisBegin)
    return fail(ParseStatus::kMissingMarker, pos,
                "expected <A>, got " + name_of(vocab, tokens[pos]));
  ++pos;

  // S1 J1 ... Sn Jn
  int expected = 1;
  while (true) {
    if (at_end()) return truncated();
    int tok = tokens[pos];
    if (tok == Vocabulary::kAnalysisEnd) {
      if (sample_count < 0) {
        if (expected == 1)
          return fail(ParseStatus::kUnexpectedToken, pos,
                      "analysis section judges no samples");
        break;  // inferred n = expected - 1
      }
      if (expected <= sample_count)
        return fail(ParseStatus::kUnexpectedToken, pos,
                    "expected S" + std::to_string(expected) + ", got </A>");
      break;
    }
    if (sample_count > 0 && expected > sample_count) {
      // All samples judged; only </A> is acceptable here.
      if (vocab.is_sample(tok))
        return fail(ParseStatus::kWrongSampleOrder, pos,
                    "extra sample header " + name_of(vocab, tok));
      return fail(ParseStatus::kMissingMarker, pos,
                  "expected </A>, got " + name_of(vocab, tok));
    }
    if (!vocab.is_sample(tok)) {
      return fail(ParseStatus::kUnexpectedToken, pos,
                  "expected S" + std::to_string(expected) + ", got " +
                      name_of(vocab, tok));
    }
    if (vocab.sample_index(tok) != expected)
      return fail(ParseStatus::kWrongSampleOrder, pos,
                  "expected S" + std::to_string(expected) + ", got " +
                      name_of(vocab, tok));
    ++pos;
    if (at_end()) return truncated();
    tok = tokens[pos];
    if (!vocab.is_judgment(tok))
      return fail(ParseStatus::kUnexpectedToken, pos,
                  "expected HLP or UNH, got " + name_of(vocab, tok));
    out.judgments.push_back(tok == Vocabulary::kHelpful ? 1 : 0);
    ++pos;
    ++expected;
  }
  const int n = static_cast<int>(out.judgments.size());
  out.spans.analysis = Span{0, pos};  // includes </A>
  ++pos;

  // <C> {Rj}* </C>
  if (at_end()) return truncated();
  if (tokens[pos] != Vocabulary::kConclusionBegin)
    return fail(ParseStatus::kMissingMarker, pos,
                "expected <C>, got " + name_of(vocab, tokens[pos]));
  out.spans.conclusion.begin = pos;
  ++pos;
  int last_cite = 0;
  while (true) {
    if (at_end()) return truncated();
    int tok = tokens[pos];
    if (tok == Vocabulary::kConclusionEnd) break;
    if (!vocab.is_cite(tok))
      return fail(ParseStatus::kMissingMarker, pos,
                  "expected R(j) or </C>, got " + name_of(vocab, tok));
    int j = vocab.cite_index(tok);
    if (j == last_cite)
      return fail(ParseStatus::kDuplicateCitation, pos,
                  "R" + std::to_string(j) + " cited twice");
    if (j < last_cite) {
      bool dup = std::find(out.citations.begin(), out.citations.end(), j) !=
                 out.citations.end();
      return fail(dup ? ParseStatus::kDuplicateCitation : ParseStatus::kCitationOrder,
                  pos, "citations must be strictly ascending");
    }
    if (j > n)
      return fail(ParseStatus::kCitationOutOfRange, pos,
                  "R" + std::to_string(j) + " exceeds sample count " +
                      std::to_string(n));
    out.citations.push_back(j);
    last_cite = j;
    ++pos;
  }
  out.spans.conclusion.end = pos;  // </C>
  ++pos;

  // <F> answer </F>
  if (at_end()) return truncated();
  if (tokens[pos] != Vocabulary::kAnswerBegin)
    return fail(ParseStatus::kMissingMarker, pos,
                "expected <F>, got " + name_of(vocab, tokens[pos]));
  out.spans.answer.begin = pos;
  ++pos;
  if (at_end()) return truncated();
  if (!vocab.is_answer(tokens[pos]))
    return fail(ParseStatus::kUnexpectedToken, pos,
                "expected answer token, got " + name_of(vocab, tokens[pos]));
  out.answer = tokens[pos];
  ++pos;
  if (at_end()) return truncated();
  if (tokens[pos] != Vocabulary::kAnswerEnd)
    return fail(ParseStatus::kMissingMarker, pos,
                "expected </F>, got " + name_of(vocab, tokens[pos]));
  out.spans.answer.end = pos;
  ++pos;

  if (pos < len)
    return fail(ParseStatus::kTrailingTokens, pos,
                "tokens after </F>");

  ParseResult r;
  r.value = std::move(out);
  return r;
}

}  // namespace

ParseResult parse_completion(const Vocabulary& vocab, std::span<const int> tokens,
                             int sample_count) {
  if (sample_count < 1) throw ContractError("parse requires sample_count >= 1");
  return parse_impl(vocab, tokens, sample_count);
}

ParseResult parse_completion(const Vocabulary& vocab, std::span<const int> tokens) {
  return parse_impl(vocab, tokens, -1);
}

ParseResult segment_spans(const Vocabulary& vocab, std::span<const int> tokens) {
  return parse_impl(vocab, tokens, -1);
}

std::vector<int> render_reference(const Vocabulary& vocab,
                                  std::span<const std::uint8_t> helpful,
                                  int answer_token) {
  const int n = static_cast<int>(helpful.size());
  if (n < 1 || n > vocab.max_samples())
    throw ContractError("render_reference: sample count out of range");
  if (!vocab.is_answer(answer_token))
    throw ContractError("render_reference: answer must be a digit or NOANS token");

  std::vector<int> out;
  out.reserve(2 * n + 7);
  out.push_back(Vocabulary::kAnalysisBegin);
  for (int j = 1; j <= n; ++j) {
    out.push_back(vocab.sample_token(j));
    out.push_back(helpful[j - 1] ? Vocabulary::kHelpful : Vocabulary::kUnhelpful);
  }
  out.push_back(Vocabulary::kAnalysisEnd);
  out.push_back(Vocabulary::kConclusionBegin);
  for (int j = 1; j <= n; ++j)
    if (helpful[j - 1]) out.push_back(vocab.cite_token(j));
  out.push_back(Vocabulary::kConclusionEnd);
  out.push_back(Vocabulary::kAnswerBegin);
  out.push_back(answer_token);
  out.push_back(Vocabulary::kAnswerEnd);
  return out;
}

GrammarState::GrammarState(const Vocabulary& vocab, int sample_count)
    : vocab_(vocab), n_(sample_count) {
  if (sample_count < 1 || sample_count > vocab.max_samples())
    throw ContractError("GrammarState: sample count out of range");
}

std::vector<std::uint8_t> GrammarState::legal_mask() const {
  std::vector<std::uint8_t> mask(vocab_.size(), 0);
  switch (stage_) {
    case Stage::kAnalysisBegin:
      mask[Vocabulary::kAnalysisBegin] = 1;
      break;
    case Stage::kSampleHeader:
      mask[vocab_.sample_token(next_sample_)] = 1;
      break;
    case Stage::kJudgment:
      mask[Vocabulary::kHelpful] = 1;
      mask[Vocabulary::kUnhelpful] = 1;
      break;
    case Stage::kAnalysisEnd:
      mask[Vocabulary::kAnalysisEnd] = 1;
      break;
    case Stage::kConclusionBegin:
      mask[Vocabulary::kConclusionBegin] = 1;
      break;
    case Stage::kCitation:
      for (int j = last_cite_ + 1; j <= n_; ++j) mask[vocab_.cite_token(j)] = 1;
      mask[Vocabulary::kConclusionEnd] = 1;
      break;
    case Stage::kAnswerBegin:
      mask[Vocabulary::kAnswerBegin] = 1;
      break;
    case Stage::kAnswerToken:
      mask[Vocabulary::kNoAnswer] = 1;
      for (int d = 0; d <= 9; ++d) mask[vocab_.digit_token(d)] = 1;
      break;
    case Stage::kAnswerEnd:
      mask[Vocabulary::kAnswerEnd] = 1;
      break;
    case Stage::kDone:
    case Stage::kDead:
      break;
  }
  return mask;
}

void GrammarState::push(int token) {
  auto legal = legal_mask();
  if (!vocab_.valid_id(token) || !legal[token]) {
    stage_ = Stage::kDead;
    return;
  }
  switch (stage_) {
    case Stage::kAnalysisBegin:
      stage_ = Stage::kSampleHeader;
      break;
    case Stage::kSampleHeader:
      stage_ = Stage::kJudgment;
      break;
    case Stage::kJudgment:
      ++next_sample_;
      stage_ = next_sample_ > n_ ? Stage::kAnalysisEnd : Stage::kSampleHeader;
      break;
    case Stage::kAnalysisEnd:
      stage_ = Stage::kConclusionBegin;
      break;
    case Stage::kConclusionBegin:
      stage_ = Stage::kCitation;
      break;
    case Stage::kCitation:
      if (token == Vocabulary::kConclusionEnd) {
        stage_ = Stage::kAnswerBegin;
      } else {
        last_cite_ = vocab_.cite_index(token);
      }
      break;
    case Stage::kAnswerBegin:
      stage_ = Stage::kAnswerToken;
      break;
    case Stage::kAnswerToken:
      stage_ = Stage::kAnswerEnd;
      break;
    case Stage::kAnswerEnd:
      stage_ = Stage::kDone;
      break;
    case Stage::kDone:
    case Stage::kDead:
      stage_ = Stage::kDead;
      break;
  }
}

}  // namespace pgrpo
