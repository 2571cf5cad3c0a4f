#include "features.hpp"

#include <algorithm>

#include "errors.hpp"

namespace pgrpo {

namespace {

struct Layout {
  int prev, section, sample, cue, evidence, cited_sum, any_cite, count,
      analysis_done, cite_done, dim;
};

Layout layout_for(const Vocabulary& vocab, int cue_bit_count) {
  Layout l{};
  int off = 0;
  l.prev = off;
  off += vocab.size();
  l.section = off;
  off += 3;
  l.sample = off;
  off += vocab.max_samples();
  l.cue = off;
  off += cue_bit_count;
  l.evidence = off;
  off += 10;
  l.cited_sum = off;
  off += 10;
  l.any_cite = off;
  off += 1;
  l.count = off;
  off += vocab.max_samples();
  l.analysis_done = off;
  off += 1;
  l.cite_done = off;
  off += 1;
  l.dim = off;
  return l;
}

}  // namespace

FeatureTracker::FeatureTracker(const Vocabulary& vocab, const Instance& instance)
    : vocab_(vocab), instance_(instance) {
  const int n = instance.sample_count();
  if (n < 1) throw ContractError("FeatureTracker: instance has no docs");
  if (n > vocab.max_samples())
    throw ContractError("FeatureTracker: instance doc count exceeds vocabulary n_max");
  cue_bits_ = static_cast<int>(instance.docs.front().cue_bits.size());
  for (const Doc& d : instance.docs)
    if (static_cast<int>(d.cue_bits.size()) != cue_bits_)
      throw ContractError("FeatureTracker: inconsistent cue bit counts");
  own_judgment_.assign(n, -1);
  cited_.assign(n, 0);
}

int FeatureTracker::feature_dim(const Vocabulary& vocab, int cue_bit_count) {
  return layout_for(vocab, cue_bit_count).dim;
}

int FeatureTracker::current_sample() const {
  const int n = instance_.sample_count();
  if (conclusion_closed_) return 0;
  if (analysis_closed_) {
    for (int j = 1; j <= n; ++j)
      if (own_judgment_[j - 1] == 1 && !cited_[j - 1]) return j;
    return 0;
  }
  if (prev_token_ >= 0 && vocab_.is_sample(prev_token_))
    return vocab_.sample_index(prev_token_);
  return std::min(judged_count_ + 1, n);
}

SparseFeatures FeatureTracker::current() const {
  const Layout l = layout_for(vocab_, cue_bits_);
  const int n = instance_.sample_count();
  SparseFeatures f;
  f.active.reserve(12);

  if (prev_token_ >= 0) f.active.push_back(l.prev + prev_token_);
  int section = conclusion_closed_ ? 2 : (analysis_closed_ ? 1 : 0);
  f.active.push_back(l.section + section);

  const int cur = current_sample();
  if (cur >= 1) {
    f.active.push_back(l.sample + cur - 1);
    if (cur <= n) {
      const Doc& d = instance_.docs[cur - 1];
      for (int b = 0; b < cue_bits_; ++b)
        if (d.cue_bits[b]) f.active.push_back(l.cue + b);
      f.active.push_back(l.evidence + d.evidence_digit);
    }
  }

  if (any_citation_) {
    f.active.push_back(l.cited_sum + cited_sum_ % 10);
    f.active.push_back(l.any_cite);
  }

  f.active.push_back(l.count + std::min(n, vocab_.max_samples()) - 1);
  if (judged_count_ >= n) f.active.push_back(l.analysis_done);
  if (analysis_closed_ && !conclusion_closed_ && cur == 0)
    f.active.push_back(l.cite_done);
  return f;
}

void FeatureTracker::push(int token) {
  const int n = instance_.sample_count();
  if (token == Vocabulary::kAnalysisEnd) analysis_closed_ = true;
  if (token == Vocabulary::kConclusionEnd) conclusion_closed_ = true;

  if (vocab_.is_judgment(token) && prev_token_ >= 0 && vocab_.is_sample(prev_token_)) {
    int j = vocab_.sample_index(prev_token_);
    if (j <= n && own_judgment_[j - 1] < 0) {
      own_judgment_[j - 1] = token == Vocabulary::kHelpful ? 1 : 0;
      ++judged_count_;
    }
  }
  if (vocab_.is_cite(token)) {
    int j = vocab_.cite_index(token);
    if (j <= n && !cited_[j - 1]) {
      cited_[j - 1] = 1;
      cited_sum_ += instance_.docs[j - 1].evidence_digit;
      any_citation_ = true;
    }
  }
  prev_token_ = token;
}

FeatureSeq build_feature_seq(const Vocabulary& vocab, const Instance& instance,
                             std::span<const int> tokens) {
  FeatureTracker tracker(vocab, instance);
  FeatureSeq seq;
  seq.reserve(tokens.size());
  for (int tok : tokens) {
    seq.push_back(tracker.current());
    tracker.push(tok);
  }
  return seq;
}

}  // namespace pgrpo
