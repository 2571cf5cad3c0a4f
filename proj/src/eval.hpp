#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "policy.hpp"
#include "synth.hpp"
#include "vocab.hpp"

namespace pgrpo {

struct JudgeVerdict {
  int score = 0;  // 0..5
  double normalized() const { return 20.0 * score; }
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeVerdict judge(const std::string& question, const std::string& gold,
                             const std::string& answer) const = 0;
};

// Score 5 on exact match, 0 otherwise. Suited to atomic synthetic answers.
class ExactJudge : public Judge {
 public:
  JudgeVerdict judge(const std::string&, const std::string& gold,
                     const std::string& answer) const override {
    return JudgeVerdict{gold == answer ? 5 : 0};
  }
};

struct RemoteJudgeOptions {
  std::string endpoint;       // e.g. http://127.0.0.1:8080
  int timeout_ms = 5000;
  int retries = 3;            // additional attempts after the first
  int backoff_base_ms = 100;  // doubles per retry
  bool failover_score0 = false;
};

// POSTs {"question","gold","answer"} to <endpoint>/score and expects
// {"score": 0..5}. Transport failures retry with exponential backoff and can
// fail over to score 0; protocol violations (malformed body, out-of-range
// score) always raise.
class RemoteJudge : public Judge {
 public:
  explicit RemoteJudge(RemoteJudgeOptions options);
  JudgeVerdict judge(const std::string& question, const std::string& gold,
                     const std::string& answer) const override;

 private:
  RemoteJudgeOptions options_;
};

// Anything that maps an instance to a completion; lets the evaluation
// protocols run against oracle or adversarial generators in tests.
class CompletionGenerator {
 public:
  virtual ~CompletionGenerator() = default;
  virtual std::vector<int> generate(const Instance& instance) const = 0;
};

class GreedyPolicyGenerator : public CompletionGenerator {
 public:
  GreedyPolicyGenerator(const PolicyParams& params, const Vocabulary& vocab,
                        int max_len = 48)
      : params_(params), vocab_(vocab), max_len_(max_len) {}
  std::vector<int> generate(const Instance& instance) const override {
    return greedy_completion(params_, vocab_, instance, max_len_);
  }

 private:
  const PolicyParams& params_;
  const Vocabulary& vocab_;
  int max_len_;
};

// ACC values (percent) indexed by the number of injected harmful docs, or by
// nothing in particular for a single TopK figure.
struct MetricSeries {
  std::vector<double> acc;
  int max_k() const { return static_cast<int>(acc.size()) - 1; }
};

enum class MetricMode { kEquation, kTable };

MetricMode metric_mode_from_name(const std::string& name);

// Equation mode: (1/k) sum_{i=1..k} ACC_{+i}.
// Table mode: mean over i = 0..k, the convention used by published tables.
double mean_accuracy(const MetricSeries& series, int k, MetricMode mode);

// Equation mode: (1/k) sum (ACC_{+0} - ACC_{+i}) / ACC_{+0}.
// Table mode: unnormalized sum of percentage-point drops.
double accuracy_degradation(const MetricSeries& series, int k, MetricMode mode);

// Exact top-K by inner product over a linear scan; ties break toward the
// lower doc_id. Returns indices into `database`.
std::vector<int> retrieve_topk(std::span<const double> query_embedding,
                               const std::vector<Doc>& database, int k);

// Polluted generation: for each answerable instance, present its helpful docs
// plus k harmful ones (its own harmful docs first, then deterministic draws
// from other instances) for every k in 0..k_max. Unparseable completions
// score 0. Instances whose helpful count would overflow the vocabulary's
// sample slots at k_max are excluded so the population is fixed across k.
MetricSeries polluted_eval(const CompletionGenerator& generator,
                           const Vocabulary& vocab, const Dataset& dataset,
                           int k_max, const Judge& judge, std::uint64_t seed);

// TopK generation: retrieve K docs per answerable query from the pooled doc
// database and judge the generated answer. Requires K <= vocabulary sample
// slots.
double topk_eval(const CompletionGenerator& generator, const Vocabulary& vocab,
                 const Dataset& dataset, int k, const Judge& judge);

std::string series_to_csv(const MetricSeries& series);
MetricSeries series_from_csv(const std::string& text);

}  // namespace pgrpo
