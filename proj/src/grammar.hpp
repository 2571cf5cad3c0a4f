#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocab.hpp"

namespace pgrpo {

// Inclusive token-index range.
struct Span {
  int begin = 0;
  int end = -1;
  int length() const { return end - begin + 1; }
};

// The three sections of a completion. Marker tokens belong to the section
// they open/close, so the spans tile [0, len) with no gaps.
struct SegmentSpans {
  Span analysis;
  Span conclusion;
  Span answer;
};

enum class ParseStatus {
  kOk = 0,
  kMissingMarker,
  kWrongSampleOrder,
  kDuplicateCitation,
  kCitationOrder,
  kCitationOutOfRange,
  kUnexpectedToken,
  kTrailingTokens,
  kTruncated,
};

const char* parse_status_name(ParseStatus s);

struct ParseFailure {
  ParseStatus code = ParseStatus::kOk;
  int position = -1;  // offending token index, or length for truncation
  std::string detail;
};

struct ParsedCompletion {
  std::vector<std::uint8_t> judgments;  // helpful=1, per sample 1..n
  std::vector<int> citations;           // strictly ascending 1-based indices
  int answer = -1;                      // digit token or NOANS token id
  SegmentSpans spans;
};

// Total outcome of parsing: either a ParsedCompletion or a reason-coded
// failure, never an exception.
struct ParseResult {
  std::optional<ParsedCompletion> value;
  ParseFailure failure;
  bool ok() const { return value.has_value(); }
};

// Strict parse against the grammar for an instance with `sample_count` docs.
ParseResult parse_completion(const Vocabulary& vocab, std::span<const int> tokens,
                             int sample_count);

// Same grammar with the sample count inferred from the analysis section.
ParseResult parse_completion(const Vocabulary& vocab, std::span<const int> tokens);

// Segment boundaries of a parseable completion (sample count inferred).
ParseResult segment_spans(const Vocabulary& vocab, std::span<const int> tokens);

// Gold chain-of-thought: judgments follow `helpful`, the conclusion cites
// exactly the helpful samples in ascending order, and the final section
// carries `answer_token`.
std::vector<int> render_reference(const Vocabulary& vocab,
                                  std::span<const std::uint8_t> helpful,
                                  int answer_token);

// Incremental tracker of which tokens keep a prefix grammatical. Used by the
// optional sampling mask; parsing proper goes through parse_completion.
class GrammarState {
 public:
  GrammarState(const Vocabulary& vocab, int sample_count);

  // True once the completion is grammatically complete (</F> consumed).
  bool done() const { return stage_ == Stage::kDone; }
  // Tokens that keep the sequence grammatical, as a mask over the vocabulary.
  std::vector<std::uint8_t> legal_mask() const;
  void push(int token);

 private:
  enum class Stage {
    kAnalysisBegin,
    kSampleHeader,
    kJudgment,
    kAnalysisEnd,
    kConclusionBegin,
    kCitation,
    kAnswerBegin,
    kAnswerToken,
    kAnswerEnd,
    kDone,
    kDead,  // an illegal token was pushed; nothing is legal anymore
  };

  const Vocabulary& vocab_;
  int n_;
  Stage stage_ = Stage::kAnalysisBegin;
  int next_sample_ = 1;
  int last_cite_ = 0;
};

}  // namespace pgrpo
