#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "features.hpp"
#include "grammar.hpp"
#include "synth.hpp"
#include "vocab.hpp"

namespace pgrpo {

struct PolicyDims {
  int feature_dim = 0;
  int hidden_dim = 0;
  int vocab_size = 0;
  int param_count() const {
    return feature_dim * hidden_dim + hidden_dim + vocab_size * hidden_dim +
           vocab_size;
  }
};

// Flat parameter vector of a two-layer tanh scorer mapping context features
// to vocabulary logits. Layout: W1 (feature_dim columns of hidden_dim),
// b1, W2 (vocab_size rows of hidden_dim), b2.
struct PolicyParams {
  PolicyDims dims;
  std::vector<double> values;
};

// Frozen copy taken before a group is sampled; value semantics make snapshot
// isolation automatic.
using PolicySnapshot = PolicyParams;

struct Trajectory {
  std::vector<int> tokens;
  std::vector<double> logprobs_old;
  std::int64_t instance_id = 0;
};

constexpr int kDefaultHiddenDim = 64;

PolicyDims default_policy_dims(const Vocabulary& vocab, int cue_bit_count,
                               int hidden_dim = kDefaultHiddenDim);

// Symmetric uniform init scaled by 1/sqrt(fan_in); biases start at zero.
// Deterministic for a given seed.
PolicyParams init_params(std::uint64_t seed, const PolicyDims& dims);

// Next-token logits for one feature vector.
std::vector<double> policy_logits(const PolicyParams& params,
                                  const SparseFeatures& features);

// Log-probability of tokens[t] given features[t], for every position.
std::vector<double> token_logprobs(const PolicyParams& params,
                                   const FeatureSeq& features,
                                   std::span<const int> tokens);

std::vector<double> token_logprobs(const PolicyParams& params,
                                   const Vocabulary& vocab,
                                   const Instance& instance,
                                   std::span<const int> tokens);

// Gradient of sum_t coeff[t] * log pi(tokens[t] | features[t]) with respect
// to the flat parameter vector.
std::vector<double> logprob_vjp(const PolicyParams& params,
                                const FeatureSeq& features,
                                std::span<const int> tokens,
                                std::span<const double> coeff);

// weight * d/dtheta [ (1/|span|) sum_{t in span} exp(lp_theta(t) - old_lp(t)) ].
// The old log-probabilities are constants (stop-gradient).
std::vector<double> logprob_gradient(const PolicyParams& params,
                                     const FeatureSeq& features,
                                     std::span<const int> tokens,
                                     std::span<const double> old_logprobs,
                                     Span span, double weight);

struct SampleOptions {
  int max_len = 48;
  bool grammar_mask = false;
};

// G independent ancestral samples at temperature 1. Each trajectory draws
// from its own substream keyed by (seed, instance_id, i), so results do not
// depend on scheduling. Generation stops at </F> or max_len.
std::vector<Trajectory> sample_group(const PolicyParams& params,
                                     const Vocabulary& vocab,
                                     const Instance& instance, int group_size,
                                     std::uint64_t seed,
                                     const SampleOptions& options = {});

// Deterministic argmax decode (ties break toward the lower token id).
std::vector<int> greedy_completion(const PolicyParams& params,
                                   const Vocabulary& vocab,
                                   const Instance& instance, int max_len = 48);

// Checkpoint: text header "pgrpo-ckpt 1 F H V" followed by the raw
// little-endian doubles; "<path>.manifest" records the vocabulary hash and
// the originating seed.
void save_checkpoint(const PolicyParams& params, const std::string& path,
                     const Vocabulary& vocab, std::uint64_t seed);
PolicyParams load_checkpoint(const std::string& path, const Vocabulary& vocab);

}  // namespace pgrpo
