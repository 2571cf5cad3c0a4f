#include "grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "errors.hpp"
#include "rng.hpp"

namespace pgrpo {

const char* train_mode_name(TrainMode mode) {
  return mode == TrainMode::kGrpo ? "grpo" : "pgrpo";
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ContractError("group_size must be >= 2");
  if (clip_epsilon <= 0 || clip_epsilon >= 1)
    throw ContractError("clip_epsilon must be in (0,1)");
  if (kl_beta < 0) throw ContractError("kl_beta must be >= 0");
  if (updates < 0) throw ContractError("updates must be >= 0");
  if (learning_rate <= 0) throw ContractError("learning_rate must be positive");
  if (max_len < 1) throw ContractError("max_len must be >= 1");
}

double partial_ratio(std::span<const double> new_logprobs,
                     std::span<const double> old_logprobs, Span span) {
  if (new_logprobs.size() != old_logprobs.size())
    throw ContractError("partial_ratio: logprob length mismatch");
  if (span.begin < 0 || span.end >= static_cast<int>(new_logprobs.size()) ||
      span.length() < 1)
    throw ContractError("partial_ratio: empty or out-of-range span");
  double sum = 0;
  for (int t = span.begin; t <= span.end; ++t)
    sum += std::exp(new_logprobs[t] - old_logprobs[t]);
  return sum / static_cast<double>(span.length());
}

double kl_penalty(std::span<const double> new_logprobs,
                  std::span<const double> ref_logprobs) {
  if (new_logprobs.size() != ref_logprobs.size())
    throw ContractError("kl_penalty: logprob length mismatch");
  if (new_logprobs.empty()) throw ContractError("kl_penalty: empty sequence");
  double sum = 0;
  for (std::size_t t = 0; t < new_logprobs.size(); ++t) {
    const double d = ref_logprobs[t] - new_logprobs[t];
    sum += std::exp(d) - d - 1.0;
  }
  return sum / static_cast<double>(new_logprobs.size());
}

namespace {

struct ClipEval {
  double value;
  double slope;  // d value / d omega
};

// Pessimistic PPO clip; ties resolve to the unclipped branch.
ClipEval clip_term(double omega, double advantage, double eps) {
  const double unclipped = omega * advantage;
  const double clipped = std::clamp(omega, 1.0 - eps, 1.0 + eps) * advantage;
  if (unclipped <= clipped) return ClipEval{unclipped, advantage};
  return ClipEval{clipped, 0.0};
}

Span full_span(const GroupItem& item) {
  return Span{0, static_cast<int>(item.tokens.size()) - 1};
}

void check_item(const GroupItem& item) {
  if (item.tokens.empty()) throw ContractError("objective: empty completion");
  if (item.old_logprobs.size() != item.tokens.size() ||
      item.ref_logprobs.size() != item.tokens.size() ||
      item.features.size() != item.tokens.size())
    throw ContractError("objective: inconsistent completion lengths");
}

// Accumulates one clipped ratio term into the objective value and, when
// requested, into the per-token logprob coefficients.
void add_term(const std::vector<double>& new_lp, const GroupItem& item, Span span,
              double advantage, double eps, double scale, double* value,
              std::vector<double>* coeff) {
  const double omega = partial_ratio(new_lp, item.old_logprobs, span);
  const ClipEval ce = clip_term(omega, advantage, eps);
  *value += scale * ce.value;
  if (coeff && ce.slope != 0.0) {
    const double w = scale * ce.slope / static_cast<double>(span.length());
    for (int t = span.begin; t <= span.end; ++t)
      (*coeff)[t] += w * std::exp(new_lp[t] - item.old_logprobs[t]);
  }
}

void add_kl(const std::vector<double>& new_lp, const GroupItem& item, double beta,
            double scale, double* value, double* kl_sum,
            std::vector<double>* coeff) {
  const double kl = kl_penalty(new_lp, item.ref_logprobs);
  *kl_sum += kl;
  *value -= scale * beta * kl;
  if (coeff && beta != 0.0) {
    const double w = scale * beta / static_cast<double>(new_lp.size());
    for (std::size_t t = 0; t < new_lp.size(); ++t) {
      // d/d new_lp [exp(ref-new) - (ref-new) - 1] = 1 - exp(ref-new)
      (*coeff)[t] -= w * (1.0 - std::exp(item.ref_logprobs[t] - new_lp[t]));
    }
  }
}

}  // namespace

ObjectiveEval grpo_objective(const PolicyParams& params,
                             std::span<const GroupItem> group,
                             std::span<const double> advantages,
                             const TrainConfig& config, bool with_grad) {
  if (group.size() != advantages.size())
    throw ContractError("grpo_objective: advantage count mismatch");
  if (group.size() < 2) throw ContractError("grpo_objective: group too small");

  ObjectiveEval out;
  if (with_grad) out.grad.assign(params.values.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(group.size());
  double kl_sum = 0;

  std::vector<double> coeff;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const GroupItem& item = group[i];
    check_item(item);
    const auto new_lp = token_logprobs(params, item.features, item.tokens);
    coeff.assign(item.tokens.size(), 0.0);
    std::vector<double>* cp = with_grad ? &coeff : nullptr;
    add_term(new_lp, item, full_span(item), advantages[i], config.clip_epsilon,
             scale, &out.value, cp);
    add_kl(new_lp, item, config.kl_beta, scale, &out.value, &kl_sum, cp);
    if (with_grad) {
      auto g = logprob_vjp(params, item.features, item.tokens, coeff);
      for (std::size_t k = 0; k < g.size(); ++k) out.grad[k] += g[k];
    }
  }
  out.kl_mean = kl_sum / static_cast<double>(group.size());
  return out;
}

ObjectiveEval pgrpo_objective(const PolicyParams& params,
                              std::span<const GroupItem> group,
                              const AdvantageMatrix& advantages,
                              const TrainConfig& config, bool with_grad) {
  const std::size_t g_count = group.size();
  if (g_count < 2) throw ContractError("pgrpo_objective: group too small");
  auto check_col = [&](const std::vector<double>& col, bool needed) {
    if (needed && col.size() != g_count)
      throw ContractError("pgrpo_objective: advantage column size mismatch");
  };
  check_col(advantages.helpfulness, config.rewards.helpfulness);
  check_col(advantages.conclusion, config.rewards.conclusion);
  check_col(advantages.format, config.rewards.format);
  check_col(advantages.answer, config.rewards.answer);

  ObjectiveEval out;
  if (with_grad) out.grad.assign(params.values.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(g_count);
  double kl_sum = 0;

  std::vector<double> coeff;
  for (std::size_t i = 0; i < g_count; ++i) {
    const GroupItem& item = group[i];
    check_item(item);
    const auto new_lp = token_logprobs(params, item.features, item.tokens);
    coeff.assign(item.tokens.size(), 0.0);
    std::vector<double>* cp = with_grad ? &coeff : nullptr;

    const bool segments_ok = item.format_ok;
    const bool fallback = !config.format_gating;  // score the whole span instead
    auto section_span = [&](Span s) { return segments_ok ? s : full_span(item); };

    if (config.rewards.helpfulness && (segments_ok || fallback))
      add_term(new_lp, item, section_span(item.spans.analysis),
               advantages.helpfulness[i], config.clip_epsilon, scale, &out.value,
               cp);
    if (config.rewards.conclusion && (segments_ok || fallback))
      add_term(new_lp, item, section_span(item.spans.conclusion),
               advantages.conclusion[i], config.clip_epsilon, scale, &out.value,
               cp);
    if (config.rewards.answer && (segments_ok || fallback))
      add_term(new_lp, item, section_span(item.spans.answer),
               advantages.answer[i], config.clip_epsilon, scale, &out.value, cp);
    if (config.rewards.format)
      add_term(new_lp, item, full_span(item), advantages.format[i],
               config.clip_epsilon, scale, &out.value, cp);
    add_kl(new_lp, item, config.kl_beta, scale, &out.value, &kl_sum, cp);

    if (with_grad) {
      auto g = logprob_vjp(params, item.features, item.tokens, coeff);
      for (std::size_t k = 0; k < g.size(); ++k) out.grad[k] += g[k];
    }
  }
  out.kl_mean = kl_sum / static_cast<double>(g_count);
  return out;
}

std::string TrainLog::to_csv() const {
  std::string out =
      "update,mode,objective,kl,mean_rf,mean_rh,mean_rc,mean_ra,"
      "format_valid_frac,mean_abs_omega_minus_1\n";
  char buf[320];
  for (const UpdateRow& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  r.update, train_mode_name(r.mode), r.objective, r.kl, r.mean_rf,
                  r.mean_rh, r.mean_rc, r.mean_ra, r.format_valid_frac,
                  r.mean_abs_omega_minus_1);
    out += buf;
  }
  return out;
}

namespace {

constexpr std::uint64_t kPickStream = 0x7069636b;
constexpr std::uint64_t kSampleStream = 0x73616d70;

struct PreparedGroup {
  std::vector<GroupItem> items;
  AdvantageMatrix adv;
  std::vector<double> scalar_adv;  // vanilla mode
  double mean_rf = 0, mean_rh = 0, mean_rc = 0, mean_ra = 0;
};

PreparedGroup prepare_group(const PolicyParams& snapshot,
                            const PolicyParams& reference,
                            const Vocabulary& vocab, const Instance& instance,
                            const TrainConfig& cfg, std::uint64_t sample_seed) {
  SampleOptions opts;
  opts.max_len = cfg.max_len;
  opts.grammar_mask = cfg.grammar_mask;
  auto group =
      sample_group(snapshot, vocab, instance, cfg.group_size, sample_seed, opts);

  std::vector<std::uint8_t> gt(instance.sample_count());
  for (int j = 0; j < instance.sample_count(); ++j)
    gt[j] = instance.docs[j].helpful_gt ? 1 : 0;
  const int gold_tok = instance.gold_answer_token(vocab);

  PreparedGroup pg;
  pg.items.reserve(group.size());
  std::vector<std::uint8_t> valid(group.size(), 0);
  std::vector<double> col_h(group.size()), col_c(group.size()),
      col_f(group.size()), col_a(group.size());

  for (std::size_t i = 0; i < group.size(); ++i) {
    GroupItem item;
    item.tokens = std::move(group[i].tokens);
    item.old_logprobs = std::move(group[i].logprobs_old);
    item.features = build_feature_seq(vocab, instance, item.tokens);
    item.ref_logprobs = token_logprobs(reference, item.features, item.tokens);

    auto parsed = parse_completion(vocab, item.tokens, instance.sample_count());
    item.format_ok = parsed.ok();
    item.raw.format = item.format_ok ? 1.0 : 0.0;
    if (parsed.ok()) {
      item.spans = parsed.value->spans;
      item.raw.helpfulness = helpfulness_reward(*parsed.value, gt);
      item.raw.conclusion = conclusion_reward(*parsed.value);
      item.raw.answer = answer_reward(*parsed.value, gold_tok);
    }
    valid[i] = item.format_ok ? 1 : 0;
    col_h[i] = item.raw.helpfulness;
    col_c[i] = item.raw.conclusion;
    col_f[i] = item.raw.format;
    col_a[i] = item.raw.answer;
    pg.mean_rf += col_f[i];
    pg.mean_rh += col_h[i];
    pg.mean_rc += col_c[i];
    pg.mean_ra += col_a[i];
    pg.items.push_back(std::move(item));
  }
  const double inv = 1.0 / static_cast<double>(group.size());
  pg.mean_rf *= inv;
  pg.mean_rh *= inv;
  pg.mean_rc *= inv;
  pg.mean_ra *= inv;

  if (cfg.format_gating && cfg.masked_group_stats) {
    pg.adv.helpfulness = normalize_column_masked(col_h, valid);
    pg.adv.conclusion = normalize_column_masked(col_c, valid);
    pg.adv.answer = normalize_column_masked(col_a, valid);
  } else {
    pg.adv.helpfulness = normalize_column(col_h);
    pg.adv.conclusion = normalize_column(col_c);
    pg.adv.answer = normalize_column(col_a);
  }
  pg.adv.format = normalize_column(col_f);

  if (cfg.mode == TrainMode::kGrpo) {
    // Vanilla baseline: the per-reward columns are normalized as usual, then
    // weighted and summed into one whole-completion advantage.
    auto nh = normalize_column(col_h);
    auto nc = normalize_column(col_c);
    auto nf = normalize_column(col_f);
    auto na = normalize_column(col_a);
    pg.scalar_adv.assign(group.size(), 0.0);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (cfg.rewards.format) pg.scalar_adv[i] += cfg.grpo_weights.format * nf[i];
      if (cfg.rewards.helpfulness)
        pg.scalar_adv[i] += cfg.grpo_weights.helpfulness * nh[i];
      if (cfg.rewards.conclusion)
        pg.scalar_adv[i] += cfg.grpo_weights.conclusion * nc[i];
      if (cfg.rewards.answer) pg.scalar_adv[i] += cfg.grpo_weights.answer * na[i];
    }
  }
  return pg;
}

}  // namespace

void train_loop(PolicyParams& params, const Vocabulary& vocab,
                const Dataset& dataset, const TrainConfig& config,
                TrainLog* log, const PolicyParams* kl_reference) {
  config.validate();
  if (dataset.empty()) throw ContractError("train_loop: empty dataset");
  if (params.dims.vocab_size != vocab.size())
    throw ContractError("train_loop: params do not match vocabulary");

  const PolicyParams reference = kl_reference ? *kl_reference : params;

  for (int u = 0; u < config.updates; ++u) {
    auto pick_rng = substream(config.seed, kPickStream, static_cast<std::uint64_t>(u));
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    const Instance& instance = dataset[pick(pick_rng)];

    const PolicySnapshot snapshot = params;
    PreparedGroup pg =
        prepare_group(snapshot, reference, vocab, instance, config,
                      mix_seed(config.seed, kSampleStream, static_cast<std::uint64_t>(u)));

    ObjectiveEval eval =
        config.mode == TrainMode::kGrpo
            ? grpo_objective(params, pg.items, pg.scalar_adv, config, true)
            : pgrpo_objective(params, pg.items, pg.adv, config, true);

    if (!std::isfinite(eval.value))
      throw NumericError("non-finite objective at update " + std::to_string(u));
    double norm = 0;
    for (double g : eval.grad) {
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient at update " + std::to_string(u));
      norm += g * g;
    }
    norm = std::sqrt(norm);

    // Fixed-length ascent step along the group gradient; a fully degenerate
    // group (no reward spread, no KL pull) moves nothing.
    if (norm > 0) {
      const double scale = config.learning_rate / norm;
      for (std::size_t k = 0; k < params.values.size(); ++k)
        params.values[k] += scale * eval.grad[k];
    }

    // Diagnostics are evaluated after the step; at the pre-step point every
    // ratio is 1 and the objective is identically 0.
    ObjectiveEval post =
        config.mode == TrainMode::kGrpo
            ? grpo_objective(params, pg.items, pg.scalar_adv, config, false)
            : pgrpo_objective(params, pg.items, pg.adv, config, false);
    double drift = 0;
    for (const GroupItem& item : pg.items) {
      const auto new_lp = token_logprobs(params, item.features, item.tokens);
      drift += std::abs(partial_ratio(new_lp, item.old_logprobs,
                                      Span{0, static_cast<int>(item.tokens.size()) - 1}) -
                        1.0);
    }
    drift /= static_cast<double>(pg.items.size());

    if (log) {
      UpdateRow row;
      row.update = u;
      row.mode = config.mode;
      row.objective = post.value;
      row.kl = post.kl_mean;
      row.mean_rf = pg.mean_rf;
      row.mean_rh = pg.mean_rh;
      row.mean_rc = pg.mean_rc;
      row.mean_ra = pg.mean_ra;
      row.format_valid_frac = pg.mean_rf;
      row.mean_abs_omega_minus_1 = drift;
      log->rows.push_back(row);
      if (log->capture_rewards) {
        if (log->reward_rows.empty()) log->reward_rows = reward_csv_header();
        for (std::size_t i = 0; i < pg.items.size(); ++i)
          log->reward_rows += reward_csv_row(
              u, static_cast<int>(i), pg.items[i].raw, pg.adv.helpfulness[i],
              pg.adv.conclusion[i], pg.adv.format[i], pg.adv.answer[i]);
      }
    }
  }
}

}  // namespace pgrpo
