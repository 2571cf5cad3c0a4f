#include "policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace pgrpo {

namespace {

// Output gain of the scorer: logits = kLogitScale * (W2 h + b2). Keeps the
// logit range responsive to the small fixed-length steps used in stage II.
constexpr double kLogitScale = 10.0;

struct ParamView {
  // W1 is stored column-major so that a sparse feature activates one
  // contiguous block.
  const double* w1;
  const double* b1;
  const double* w2;  // row-major, one row per vocabulary entry
  const double* b2;
};

ParamView view(const PolicyParams& p) {
  const double* base = p.values.data();
  const auto& d = p.dims;
  return ParamView{base, base + d.feature_dim * d.hidden_dim,
                   base + d.feature_dim * d.hidden_dim + d.hidden_dim,
                   base + d.feature_dim * d.hidden_dim + d.hidden_dim +
                       d.vocab_size * d.hidden_dim};
}

struct MutParamView {
  double* w1;
  double* b1;
  double* w2;
  double* b2;
};

MutParamView view(std::vector<double>& values, const PolicyDims& d) {
  double* base = values.data();
  return MutParamView{base, base + d.feature_dim * d.hidden_dim,
                      base + d.feature_dim * d.hidden_dim + d.hidden_dim,
                      base + d.feature_dim * d.hidden_dim + d.hidden_dim +
                          d.vocab_size * d.hidden_dim};
}

void check_features(const PolicyDims& dims, const SparseFeatures& f) {
  for (int idx : f.active)
    if (idx < 0 || idx >= dims.feature_dim)
      throw ContractError("feature index out of range");
}

// hidden = tanh(b1 + sum of active W1 columns); logits = b2 + W2 * hidden
void forward(const PolicyParams& params, const SparseFeatures& features,
             std::vector<double>& hidden, std::vector<double>& logits) {
  const auto& d = params.dims;
  const ParamView v = view(params);
  check_features(d, features);

  hidden.assign(v.b1, v.b1 + d.hidden_dim);
  for (int idx : features.active) {
    const double* col = v.w1 + static_cast<std::size_t>(idx) * d.hidden_dim;
    for (int h = 0; h < d.hidden_dim; ++h) hidden[h] += col[h];
  }
  for (double& x : hidden) x = std::tanh(x);

  logits.assign(d.vocab_size, 0.0);
  for (int t = 0; t < d.vocab_size; ++t) {
    const double* row = v.w2 + static_cast<std::size_t>(t) * d.hidden_dim;
    double acc = v.b2[t];
    for (int h = 0; h < d.hidden_dim; ++h) acc += row[h] * hidden[h];
    logits[t] = kLogitScale * acc;
  }
}

double log_sum_exp(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0;
  for (double x : logits) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

}  // namespace

PolicyDims default_policy_dims(const Vocabulary& vocab, int cue_bit_count,
                               int hidden_dim) {
  return PolicyDims{FeatureTracker::feature_dim(vocab, cue_bit_count), hidden_dim,
                    vocab.size()};
}

PolicyParams init_params(std::uint64_t seed, const PolicyDims& dims) {
  if (dims.feature_dim <= 0 || dims.hidden_dim <= 0 || dims.vocab_size <= 0)
    throw ContractError("init_params: dims must be positive");
  PolicyParams p;
  p.dims = dims;
  p.values.assign(static_cast<std::size_t>(dims.param_count()), 0.0);

  auto rng = substream(seed, 0x706f6c69);  // policy init stream
  MutParamView v = view(p.values, dims);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(dims.feature_dim));
  std::uniform_real_distribution<double> u1(-s1, s1);
  for (int i = 0; i < dims.feature_dim * dims.hidden_dim; ++i) v.w1[i] = u1(rng);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
  std::uniform_real_distribution<double> u2(-s2, s2);
  for (int i = 0; i < dims.vocab_size * dims.hidden_dim; ++i) v.w2[i] = u2(rng);
  return p;
}

std::vector<double> policy_logits(const PolicyParams& params,
                                  const SparseFeatures& features) {
  std::vector<double> hidden, logits;
  forward(params, features, hidden, logits);
  return logits;
}

std::vector<double> token_logprobs(const PolicyParams& params,
                                   const FeatureSeq& features,
                                   std::span<const int> tokens) {
  if (features.size() != tokens.size())
    throw ContractError("token_logprobs: feature/token length mismatch");
  std::vector<double> hidden, logits, out;
  out.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    int tok = tokens[t];
    if (tok < 0 || tok >= params.dims.vocab_size)
      throw ContractError("token id out of vocabulary");
    forward(params, features[t], hidden, logits);
    out.push_back(logits[tok] - log_sum_exp(logits));
  }
  return out;
}

std::vector<double> token_logprobs(const PolicyParams& params,
                                   const Vocabulary& vocab,
                                   const Instance& instance,
                                   std::span<const int> tokens) {
  return token_logprobs(params, build_feature_seq(vocab, instance, tokens), tokens);
}

std::vector<double> logprob_vjp(const PolicyParams& params,
                                const FeatureSeq& features,
                                std::span<const int> tokens,
                                std::span<const double> coeff) {
  if (features.size() != tokens.size() || coeff.size() != tokens.size())
    throw ContractError("logprob_vjp: length mismatch");
  const auto& d = params.dims;
  const ParamView v = view(params);

  std::vector<double> grad(params.values.size(), 0.0);
  MutParamView g = view(grad, d);

  std::vector<double> hidden, logits, probs(d.vocab_size), dlogit(d.vocab_size),
      dhidden(d.hidden_dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (coeff[t] == 0.0) continue;
    int tok = tokens[t];
    if (tok < 0 || tok >= d.vocab_size)
      throw ContractError("token id out of vocabulary");
    forward(params, features[t], hidden, logits);

    const double lse = log_sum_exp(logits);
    for (int k = 0; k < d.vocab_size; ++k) probs[k] = std::exp(logits[k] - lse);

    // d lp(tok)/d logit_k = [k == tok] - softmax_k, then through the gain
    for (int k = 0; k < d.vocab_size; ++k) dlogit[k] = -coeff[t] * probs[k];
    dlogit[tok] += coeff[t];
    for (int k = 0; k < d.vocab_size; ++k) dlogit[k] *= kLogitScale;

    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (int k = 0; k < d.vocab_size; ++k) {
      const double dk = dlogit[k];
      g.b2[k] += dk;
      const double* row = v.w2 + static_cast<std::size_t>(k) * d.hidden_dim;
      double* grow = g.w2 + static_cast<std::size_t>(k) * d.hidden_dim;
      for (int h = 0; h < d.hidden_dim; ++h) {
        grow[h] += dk * hidden[h];
        dhidden[h] += dk * row[h];
      }
    }
    for (int h = 0; h < d.hidden_dim; ++h) {
      const double dpre = dhidden[h] * (1.0 - hidden[h] * hidden[h]);
      g.b1[h] += dpre;
      dhidden[h] = dpre;
    }
    for (int idx : features[t].active) {
      double* col = g.w1 + static_cast<std::size_t>(idx) * d.hidden_dim;
      for (int h = 0; h < d.hidden_dim; ++h) col[h] += dhidden[h];
    }
  }
  return grad;
}

std::vector<double> logprob_gradient(const PolicyParams& params,
                                     const FeatureSeq& features,
                                     std::span<const int> tokens,
                                     std::span<const double> old_logprobs,
                                     Span span, double weight) {
  if (old_logprobs.size() != tokens.size())
    throw ContractError("logprob_gradient: old logprob length mismatch");
  if (span.begin < 0 || span.end >= static_cast<int>(tokens.size()) ||
      span.length() < 1)
    throw ContractError("logprob_gradient: empty or out-of-range span");
  auto new_lp = token_logprobs(params, features, tokens);
  std::vector<double> coeff(tokens.size(), 0.0);
  // d ratio_t / d lp_t = ratio_t, so the mean-ratio gradient weights each
  // position by its own ratio.
  const double scale = weight / static_cast<double>(span.length());
  for (int t = span.begin; t <= span.end; ++t)
    coeff[t] = scale * std::exp(new_lp[t] - old_logprobs[t]);
  return logprob_vjp(params, features, tokens, coeff);
}

namespace {

int draw_token(const std::vector<double>& logits,
               const std::vector<std::uint8_t>* mask, std::mt19937_64& rng,
               double* logprob_out) {
  const int v = static_cast<int>(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < v; ++k)
    if (!mask || (*mask)[k]) mx = std::max(mx, logits[k]);
  double z = 0;
  for (int k = 0; k < v; ++k)
    if (!mask || (*mask)[k]) z += std::exp(logits[k] - mx);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * z;
  double acc = 0;
  int chosen = -1;
  for (int k = 0; k < v; ++k) {
    if (mask && !(*mask)[k]) continue;
    acc += std::exp(logits[k] - mx);
    if (u < acc) {
      chosen = k;
      break;
    }
  }
  if (chosen < 0) {  // numerical tail: fall back to the last admissible token
    for (int k = v - 1; k >= 0; --k)
      if (!mask || (*mask)[k]) {
        chosen = k;
        break;
      }
  }
  *logprob_out = logits[chosen] - mx - std::log(z);
  return chosen;
}

}  // namespace

std::vector<Trajectory> sample_group(const PolicyParams& params,
                                     const Vocabulary& vocab,
                                     const Instance& instance, int group_size,
                                     std::uint64_t seed,
                                     const SampleOptions& options) {
  if (group_size < 2) throw ContractError("sample_group: group size must be >= 2");
  if (options.max_len < 1) throw ContractError("sample_group: max_len must be >= 1");
  if (params.dims.vocab_size != vocab.size())
    throw ContractError("sample_group: params do not match vocabulary");

  std::vector<Trajectory> group;
  group.reserve(group_size);
  std::vector<double> hidden, logits;
  for (int i = 0; i < group_size; ++i) {
    auto rng = substream(seed, static_cast<std::uint64_t>(instance.instance_id),
                         static_cast<std::uint64_t>(i));
    Trajectory traj;
    traj.instance_id = instance.instance_id;
    FeatureTracker tracker(vocab, instance);
    GrammarState grammar(vocab, instance.sample_count());
    while (static_cast<int>(traj.tokens.size()) < options.max_len) {
      forward(params, tracker.current(), hidden, logits);
      double lp = 0;
      int tok;
      if (options.grammar_mask) {
        auto mask = grammar.legal_mask();
        tok = draw_token(logits, &mask, rng, &lp);
      } else {
        tok = draw_token(logits, nullptr, rng, &lp);
      }
      traj.tokens.push_back(tok);
      traj.logprobs_old.push_back(lp);
      tracker.push(tok);
      grammar.push(tok);
      if (tok == Vocabulary::kAnswerEnd) break;
    }
    group.push_back(std::move(traj));
  }
  return group;
}

std::vector<int> greedy_completion(const PolicyParams& params,
                                   const Vocabulary& vocab,
                                   const Instance& instance, int max_len) {
  if (params.dims.vocab_size != vocab.size())
    throw ContractError("greedy_completion: params do not match vocabulary");
  std::vector<int> tokens;
  FeatureTracker tracker(vocab, instance);
  std::vector<double> hidden, logits;
  while (static_cast<int>(tokens.size()) < max_len) {
    forward(params, tracker.current(), hidden, logits);
    int best = 0;
    for (int k = 1; k < params.dims.vocab_size; ++k)
      if (logits[k] > logits[best]) best = k;
    tokens.push_back(best);
    tracker.push(best);
    if (best == Vocabulary::kAnswerEnd) break;
  }
  return tokens;
}

void save_checkpoint(const PolicyParams& params, const std::string& path,
                     const Vocabulary& vocab, std::uint64_t seed) {
  if (params.dims.vocab_size != vocab.size())
    throw ContractError("save_checkpoint: params do not match vocabulary");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "pgrpo-ckpt 1 " << params.dims.feature_dim << ' ' << params.dims.hidden_dim
    << ' ' << params.dims.vocab_size << '\n';
  f.write(reinterpret_cast<const char*>(params.values.data()),
          static_cast<std::streamsize>(params.values.size() * sizeof(double)));
  if (!f) throw IoError("write failed: " + path);

  char buf[128];
  std::snprintf(buf, sizeof(buf), "vocab_hash=%016llx\nseed=%llu\n",
                static_cast<unsigned long long>(vocab.manifest_hash()),
                static_cast<unsigned long long>(seed));
  std::ofstream mf(path + ".manifest", std::ios::binary);
  if (!mf) throw IoError("cannot open for writing: " + path + ".manifest");
  mf << buf;
}

PolicyParams load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string header;
  std::getline(f, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  PolicyDims dims;
  hs >> magic >> version >> dims.feature_dim >> dims.hidden_dim >> dims.vocab_size;
  if (!hs || magic != "pgrpo-ckpt" || version != 1)
    throw FormatError("bad checkpoint header in " + path);
  if (dims.vocab_size != vocab.size())
    throw ContractError("checkpoint vocabulary size " +
                        std::to_string(dims.vocab_size) +
                        " does not match current vocabulary " +
                        std::to_string(vocab.size()));
  PolicyParams p;
  p.dims = dims;
  p.values.resize(static_cast<std::size_t>(dims.param_count()));
  f.read(reinterpret_cast<char*>(p.values.data()),
         static_cast<std::streamsize>(p.values.size() * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(p.values.size() * sizeof(double)))
    throw FormatError("truncated checkpoint: " + path);

  std::ifstream mf(path + ".manifest", std::ios::binary);
  if (mf) {
    std::string line;
    while (std::getline(mf, line)) {
      if (line.rfind("vocab_hash=", 0) == 0) {
        unsigned long long h = std::stoull(line.substr(11), nullptr, 16);
        if (h != vocab.manifest_hash())
          throw ContractError("checkpoint was written with a different vocabulary");
      }
    }
  }
  return p;
}

}  // namespace pgrpo
