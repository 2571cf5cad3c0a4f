#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "policy.hpp"
#include "rewards.hpp"
#include "synth.hpp"

namespace pgrpo {

enum class TrainMode { kGrpo, kPartialGrpo };

const char* train_mode_name(TrainMode mode);

struct RewardToggles {
  bool format = true;
  bool helpfulness = true;
  bool conclusion = true;
  bool answer = true;
};

struct RewardWeights {
  double format = 1.0;
  double helpfulness = 1.0;
  double conclusion = 1.0;
  double answer = 1.0;
};

struct TrainConfig {
  int group_size = 8;
  double learning_rate = 1e-2;
  int updates = 300;
  double clip_epsilon = 0.2;
  double kl_beta = 0.01;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kPartialGrpo;
  RewardToggles rewards;
  RewardWeights grpo_weights;  // vanilla baseline's weighted reward sum
  int max_len = 48;
  // Skip helpfulness/conclusion/answer terms for completions that fail the
  // format check.
  bool format_gating = true;
  // Compute the segment rewards' group statistics over format-valid
  // completions only, so unassessable completions do not shift them.
  bool masked_group_stats = true;
  bool grammar_mask = false;

  void validate() const;
};

// Mean over the inclusive span of per-token probability ratios
// exp(new - old). Equals 1 whenever the two policies agree on the span.
double partial_ratio(std::span<const double> new_logprobs,
                     std::span<const double> old_logprobs, Span span);

// Mean over tokens of exp(ref-new) - (ref-new) - 1; nonnegative estimator of
// KL(new || ref).
double kl_penalty(std::span<const double> new_logprobs,
                  std::span<const double> ref_logprobs);

// One completion prepared for objective evaluation.
struct GroupItem {
  FeatureSeq features;
  std::vector<int> tokens;
  std::vector<double> old_logprobs;  // under the sampling snapshot
  std::vector<double> ref_logprobs;  // under the KL reference
  bool format_ok = false;
  SegmentSpans spans;  // meaningful iff format_ok
  RewardVector raw;
};

struct ObjectiveEval {
  double value = 0;
  double kl_mean = 0;
  std::vector<double> grad;  // empty unless requested
};

// Vanilla surrogate: (1/G) sum_i clip(omega_full, A_i) - beta * KL_i with the
// PPO pessimistic clip.
ObjectiveEval grpo_objective(const PolicyParams& params,
                             std::span<const GroupItem> group,
                             std::span<const double> advantages,
                             const TrainConfig& config, bool with_grad = true);

// Segment-scoped surrogate: every enabled (reward, span) pair contributes its
// own clipped ratio term. Helpfulness and conclusion ride their sections, the
// answer term rides the final section, and the format term always spans the
// whole completion. With format gating on, segment terms are skipped for
// unparseable completions; with it off they fall back to the full span.
ObjectiveEval pgrpo_objective(const PolicyParams& params,
                              std::span<const GroupItem> group,
                              const AdvantageMatrix& advantages,
                              const TrainConfig& config, bool with_grad = true);

struct UpdateRow {
  int update = 0;
  TrainMode mode = TrainMode::kPartialGrpo;
  double objective = 0;  // evaluated after the parameter step
  double kl = 0;
  double mean_rf = 0, mean_rh = 0, mean_rc = 0, mean_ra = 0;
  double format_valid_frac = 0;
  double mean_abs_omega_minus_1 = 0;
};

struct TrainLog {
  std::vector<UpdateRow> rows;
  bool capture_rewards = false;
  std::string reward_rows;  // per-completion breakdown CSV (with header)

  std::string to_csv() const;
};

// Stage-II loop: one snapshot, one sampled instance, one group, and one plain
// gradient-ascent step per update. The KL reference is the parameter vector
// at entry (the SFT checkpoint in the standard pipeline) unless an explicit
// reference is supplied.
void train_loop(PolicyParams& params, const Vocabulary& vocab,
                const Dataset& dataset, const TrainConfig& config,
                TrainLog* log = nullptr,
                const PolicyParams* kl_reference = nullptr);

}  // namespace pgrpo
