#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "features.hpp"
#include "grammar.hpp"
#include "policy.hpp"
#include "synth.hpp"

using namespace pgrpo;

namespace {

const Vocabulary& vocab() {
  static Vocabulary v;
  return v;
}

Instance test_instance(int n, std::uint64_t seed) {
  GenConfig cfg;
  cfg.num_instances = 64;
  cfg.seed = seed;
  auto ds = generate_dataset(cfg);
  for (const Instance& inst : ds)
    if (inst.sample_count() == n) return inst;
  return ds.front();
}

FeatureSeq random_features(std::mt19937_64& rng, int feature_dim, int len) {
  FeatureSeq seq(len);
  std::uniform_int_distribution<int> count_dist(1, 4);
  std::uniform_int_distribution<int> idx_dist(0, feature_dim - 1);
  for (auto& f : seq) {
    std::set<int> chosen;
    const int want = count_dist(rng);
    while (static_cast<int>(chosen.size()) < want) chosen.insert(idx_dist(rng));
    f.active.assign(chosen.begin(), chosen.end());
  }
  return seq;
}

std::vector<int> random_tokens(std::mt19937_64& rng, int vocab_size, int len) {
  std::vector<int> t(len);
  std::uniform_int_distribution<int> d(0, vocab_size - 1);
  for (int& x : t) x = d(rng);
  return t;
}

double max_rel_error(const std::vector<double>& analytic,
                     const std::vector<double>& fd) {
  double worst = 0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    double denom = std::max(std::abs(fd[k]), 1e-6);
    worst = std::max(worst, std::abs(analytic[k] - fd[k]) / denom);
  }
  return worst;
}

template <typename F>
std::vector<double> central_differences(PolicyParams params, F f, double step) {
  std::vector<double> grad(params.values.size());
  for (std::size_t k = 0; k < params.values.size(); ++k) {
    const double orig = params.values[k];
    params.values[k] = orig + step;
    const double hi = f(params);
    params.values[k] = orig - step;
    const double lo = f(params);
    params.values[k] = orig;
    grad[k] = (hi - lo) / (2 * step);
  }
  return grad;
}

}  // namespace

TEST_CASE("init_params is deterministic and validates dims") {
  PolicyDims dims{8, 4, 16};
  auto a = init_params(7, dims);
  auto b = init_params(7, dims);
  CHECK(a.values == b.values);
  auto c = init_params(8, dims);
  CHECK(a.values != c.values);
  CHECK(static_cast<int>(a.values.size()) == dims.param_count());
  CHECK_THROWS_AS(init_params(1, PolicyDims{0, 4, 16}), ContractError);
  CHECK_THROWS_AS(init_params(1, PolicyDims{8, -1, 16}), ContractError);
}

TEST_CASE("zero parameters give a uniform policy") {
  PolicyDims dims{8, 4, 32};
  PolicyParams zero{dims, std::vector<double>(dims.param_count(), 0.0)};
  std::mt19937_64 rng(2);
  auto features = random_features(rng, dims.feature_dim, 12);
  auto tokens = random_tokens(rng, dims.vocab_size, 12);
  for (double lp : token_logprobs(zero, features, tokens))
    CHECK(lp == doctest::Approx(-std::log(32.0)).epsilon(1e-12));
}

TEST_CASE("next-token distribution is normalized and logprobs are nonpositive") {
  auto inst = test_instance(5, 19);
  auto params = init_params(3, default_policy_dims(vocab(), 4));
  std::vector<std::uint8_t> helpful(inst.sample_count());
  for (int j = 0; j < inst.sample_count(); ++j)
    helpful[j] = inst.docs[j].helpful_gt ? 1 : 0;
  auto gold = render_reference(vocab(), helpful, inst.gold_answer_token(vocab()));
  auto seq = build_feature_seq(vocab(), inst, gold);
  for (const auto& f : seq) {
    auto logits = policy_logits(params, f);
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double x : logits) z += std::exp(x - mx);
    double total = 0;
    for (double x : logits) total += std::exp(x - mx) / z;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (double lp : token_logprobs(params, seq, gold)) CHECK(lp <= 0.0);
  CHECK_THROWS_AS(
      token_logprobs(params, seq, std::vector<int>(gold.size(), vocab().size())),
      ContractError);
}

TEST_CASE("sampling is deterministic, sized, and scored consistently") {
  auto inst = test_instance(5, 19);
  auto params = init_params(11, default_policy_dims(vocab(), 4));

  auto g1 = sample_group(params, vocab(), inst, 8, 99);
  auto g2 = sample_group(params, vocab(), inst, 8, 99);
  REQUIRE(g1.size() == 8);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1[i].tokens == g2[i].tokens);
    CHECK(g1[i].logprobs_old == g2[i].logprobs_old);
    CHECK(g1[i].tokens.size() == g1[i].logprobs_old.size());
    CHECK(g1[i].tokens.size() <= 48);
  }
  CHECK_THROWS_AS(sample_group(params, vocab(), inst, 1, 99), ContractError);

  SUBCASE("recomputed logprobs equal the sampler's record") {
    for (const auto& traj : g1) {
      auto lp = token_logprobs(params, vocab(), inst, traj.tokens);
      REQUIRE(lp.size() == traj.logprobs_old.size());
      for (std::size_t t = 0; t < lp.size(); ++t)
        CHECK(std::abs(lp[t] - traj.logprobs_old[t]) < 1e-12);
    }
  }
  SUBCASE("snapshot isolation") {
    PolicySnapshot snap = params;
    auto lp_before = token_logprobs(snap, vocab(), inst, g1[0].tokens);
    for (double& x : params.values) x += 0.5;
    auto lp_after = token_logprobs(snap, vocab(), inst, g1[0].tokens);
    CHECK(lp_before == lp_after);
  }
}

TEST_CASE("uniform policy almost never matches the grammar") {
  auto inst = test_instance(5, 19);
  PolicyDims dims = default_policy_dims(vocab(), 4);
  PolicyParams zero{dims, std::vector<double>(dims.param_count(), 0.0)};
  SampleOptions opts;
  opts.max_len = 40;
  int valid = 0;
  const int draws = 1000;
  for (int i = 0; i < draws; i += 2) {
    auto g = sample_group(zero, vocab(), inst, 2, 1000 + i, opts);
    for (const auto& traj : g)
      if (parse_completion(vocab(), traj.tokens, inst.sample_count()).ok()) ++valid;
  }
  CHECK(valid < draws / 20);  // < 5%
}

TEST_CASE("grammar-masked sampling always parses") {
  auto inst = test_instance(4, 19);
  auto params = init_params(13, default_policy_dims(vocab(), 4));
  SampleOptions opts;
  opts.grammar_mask = true;
  auto g = sample_group(params, vocab(), inst, 8, 5, opts);
  for (const auto& traj : g)
    CHECK(parse_completion(vocab(), traj.tokens, inst.sample_count()).ok());
}

TEST_CASE("logprob vjp matches central finite differences") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    PolicyDims dims{8, 4, 16};
    auto params = init_params(100 + trial, dims);
    const int len = 6;
    auto features = random_features(rng, dims.feature_dim, len);
    auto tokens = random_tokens(rng, dims.vocab_size, len);
    std::vector<double> coeff(len);
    std::uniform_real_distribution<double> c(-1, 1);
    for (double& x : coeff) x = c(rng);

    auto analytic = logprob_vjp(params, features, tokens, coeff);
    auto fd = central_differences(
        params,
        [&](const PolicyParams& p) {
          auto lp = token_logprobs(p, features, tokens);
          double s = 0;
          for (int t = 0; t < len; ++t) s += coeff[t] * lp[t];
          return s;
        },
        1e-5);
    CHECK(max_rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("segment ratio gradient: finite differences, linearity, zero weight") {
  std::mt19937_64 rng(78);
  PolicyDims dims{8, 4, 16};
  auto old_params = init_params(55, dims);
  auto params = init_params(56, dims);
  const int len = 8;
  auto features = random_features(rng, dims.feature_dim, len);
  auto tokens = random_tokens(rng, dims.vocab_size, len);
  auto old_lp = token_logprobs(old_params, features, tokens);
  const Span span{2, 5};

  auto analytic = logprob_gradient(params, features, tokens, old_lp, span, 0.7);
  auto fd = central_differences(
      params,
      [&](const PolicyParams& p) {
        auto lp = token_logprobs(p, features, tokens);
        double s = 0;
        for (int t = span.begin; t <= span.end; ++t)
          s += std::exp(lp[t] - old_lp[t]);
        return 0.7 * s / span.length();
      },
      1e-5);
  CHECK(max_rel_error(analytic, fd) < 1e-4);

  auto doubled = logprob_gradient(params, features, tokens, old_lp, span, 1.4);
  for (std::size_t k = 0; k < analytic.size(); ++k)
    CHECK(std::abs(doubled[k] - 2 * analytic[k]) < 1e-12);

  for (double g : logprob_gradient(params, features, tokens, old_lp, span, 0.0))
    CHECK(g == 0.0);

  CHECK_THROWS_AS(
      logprob_gradient(params, features, tokens, old_lp, Span{5, 4}, 1.0),
      ContractError);
}

TEST_CASE("checkpoint round trip and vocabulary binding") {
  auto params = init_params(42, default_policy_dims(vocab(), 4));
  auto dir = std::filesystem::temp_directory_path();
  auto path = (dir / "pgrpo_test_ckpt.bin").string();

  save_checkpoint(params, path, vocab(), 42);
  auto loaded = load_checkpoint(path, vocab());
  CHECK(loaded.values == params.values);
  CHECK(loaded.dims.feature_dim == params.dims.feature_dim);

  SUBCASE("manifest hash mismatch is rejected") {
    std::ofstream mf(path + ".manifest");
    mf << "vocab_hash=0000000000000000\nseed=42\n";
    mf.close();
    CHECK_THROWS_AS(load_checkpoint(path, vocab()), ContractError);
  }
  SUBCASE("truncated payload is rejected") {
    auto content = [&] {
      std::ifstream f(path, std::ios::binary);
      std::ostringstream ss;
      ss << f.rdbuf();
      return ss.str();
    }();
    std::ofstream f(path, std::ios::binary);
    f << content.substr(0, content.size() / 2);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path, vocab()), FormatError);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".manifest");
}
