#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "policy.hpp"
#include "synth.hpp"
#include "vocab.hpp"

namespace pgrpo {

struct SftConfig {
  double data_fraction = 0.15;
  int steps = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SftLoss {
  double loss = 0;
  std::vector<double> grad;  // empty unless requested
};

// Mean per-token negative log-likelihood of the gold tokens.
SftLoss sft_loss(const PolicyParams& params, const FeatureSeq& features,
                 std::span<const int> gold_tokens, bool with_grad = true);

SftLoss sft_loss(const PolicyParams& params, const Vocabulary& vocab,
                 const Instance& instance, std::span<const int> gold_tokens,
                 bool with_grad = true);

// Stage-I warm-up: `steps` SGD steps cycling over the leading
// ceil(data_fraction * N) instances, each step fitting that instance's gold
// chain of thought. Returns the frozen copy of the warmed parameters that
// serves as the KL reference in stage II. `log_csv`, when given, receives
// "update,loss" rows.
PolicyParams warmup(PolicyParams& params, const Vocabulary& vocab,
                    const Dataset& dataset, const SftConfig& config,
                    std::string* log_csv = nullptr);

}  // namespace pgrpo
