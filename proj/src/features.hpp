#pragma once

#include <span>
#include <vector>

#include "synth.hpp"
#include "vocab.hpp"

namespace pgrpo {

// Context features are binary, so a feature vector is just the sorted list of
// active indices.
struct SparseFeatures {
  std::vector<int> active;
};

using FeatureSeq = std::vector<SparseFeatures>;

// Deterministic map from (instance, generated prefix) to the feature vector
// conditioning the next token. Blocks, in order:
//   previous token one-hot | section one-hot (analysis/conclusion/answer) |
//   current sample one-hot | current doc cue bits | current doc evidence
//   one-hot | cited-evidence digit-sum one-hot | any-citation flag |
//   sample-count one-hot | analysis-complete flag | citations-exhausted flag
//
// "Current sample" is the doc being judged in the analysis section, and the
// next uncited doc the completion itself judged helpful in the conclusion
// section. The tracker is total: any token sequence, grammatical or not,
// yields well-defined features.
class FeatureTracker {
 public:
  FeatureTracker(const Vocabulary& vocab, const Instance& instance);

  static int feature_dim(const Vocabulary& vocab, int cue_bit_count);

  // Features for the position about to be generated.
  SparseFeatures current() const;
  void push(int token);

 private:
  int current_sample() const;

  const Vocabulary& vocab_;
  const Instance& instance_;
  int cue_bits_;
  int prev_token_ = -1;
  bool analysis_closed_ = false;
  bool conclusion_closed_ = false;
  std::vector<int> own_judgment_;  // -1 unknown, 0 unhelpful, 1 helpful
  int judged_count_ = 0;
  std::vector<std::uint8_t> cited_;
  int cited_sum_ = 0;
  bool any_citation_ = false;
};

FeatureSeq build_feature_seq(const Vocabulary& vocab, const Instance& instance,
                             std::span<const int> tokens);

}  // namespace pgrpo
