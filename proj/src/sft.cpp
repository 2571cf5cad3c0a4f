#include "sft.hpp"

#include <cmath>
#include <cstdio>

#include "errors.hpp"
#include "grammar.hpp"

namespace pgrpo {

namespace {
constexpr int kBatchSize = 2;  // gold sequences fitted per warm-up step
}

void SftConfig::validate() const {
  if (!(data_fraction > 0.0) || data_fraction > 1.0)
    throw ContractError("data_fraction must be in (0,1]");
  if (steps < 0) throw ContractError("steps must be >= 0");
  if (learning_rate <= 0) throw ContractError("learning_rate must be positive");
}

SftLoss sft_loss(const PolicyParams& params, const FeatureSeq& features,
                 std::span<const int> gold_tokens, bool with_grad) {
  if (gold_tokens.empty()) throw ContractError("sft_loss: empty gold sequence");
  const auto lp = token_logprobs(params, features, gold_tokens);
  SftLoss out;
  for (double x : lp) out.loss -= x;
  out.loss /= static_cast<double>(lp.size());
  if (with_grad) {
    std::vector<double> coeff(gold_tokens.size(),
                              -1.0 / static_cast<double>(gold_tokens.size()));
    out.grad = logprob_vjp(params, features, gold_tokens, coeff);
  }
  return out;
}

SftLoss sft_loss(const PolicyParams& params, const Vocabulary& vocab,
                 const Instance& instance, std::span<const int> gold_tokens,
                 bool with_grad) {
  return sft_loss(params, build_feature_seq(vocab, instance, gold_tokens),
                  gold_tokens, with_grad);
}

PolicyParams warmup(PolicyParams& params, const Vocabulary& vocab,
                    const Dataset& dataset, const SftConfig& config,
                    std::string* log_csv) {
  config.validate();
  if (dataset.empty()) throw ContractError("warmup: empty dataset");
  if (params.dims.vocab_size != vocab.size())
    throw ContractError("warmup: params do not match vocabulary");

  const std::size_t slice = static_cast<std::size_t>(
      std::ceil(config.data_fraction * static_cast<double>(dataset.size())));

  struct GoldEntry {
    FeatureSeq features;
    std::vector<int> tokens;
  };
  std::vector<GoldEntry> gold;
  gold.reserve(slice);
  for (std::size_t i = 0; i < slice && i < dataset.size(); ++i) {
    const Instance& inst = dataset[i];
    std::vector<std::uint8_t> helpful(inst.sample_count());
    for (int j = 0; j < inst.sample_count(); ++j)
      helpful[j] = inst.docs[j].helpful_gt ? 1 : 0;
    GoldEntry e;
    e.tokens = render_reference(vocab, helpful, inst.gold_answer_token(vocab));
    e.features = build_feature_seq(vocab, inst, e.tokens);
    gold.push_back(std::move(e));
  }

  if (log_csv) *log_csv = "update,loss\n";
  char buf[64];
  for (int step = 0; step < config.steps; ++step) {
    // One step fits a small batch of consecutive slice entries, descending
    // the summed token NLL; the reported loss stays the per-token mean.
    double step_loss = 0;
    long step_tokens = 0;
    for (int b = 0; b < kBatchSize; ++b) {
      const GoldEntry& e =
          gold[(static_cast<std::size_t>(step) * kBatchSize + b) % gold.size()];
      SftLoss l = sft_loss(params, e.features, e.tokens, true);
      for (std::size_t k = 0; k < params.values.size(); ++k)
        params.values[k] -= config.learning_rate * l.grad[k];
      step_loss += l.loss * static_cast<double>(e.tokens.size());
      step_tokens += static_cast<long>(e.tokens.size());
    }
    if (log_csv) {
      std::snprintf(buf, sizeof(buf), "%d,%.10g\n", step,
                    step_loss / static_cast<double>(step_tokens));
      *log_csv += buf;
    }
  }
  return params;  // frozen copy: the stage-II KL reference
}

}  // namespace pgrpo
