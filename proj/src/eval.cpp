#include "eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "grammar.hpp"
#include "rng.hpp"

namespace pgrpo {

MetricMode metric_mode_from_name(const std::string& name) {
  if (name == "equation") return MetricMode::kEquation;
  if (name == "table") return MetricMode::kTable;
  throw ContractError("unknown metric mode '" + name + "'");
}

double mean_accuracy(const MetricSeries& series, int k, MetricMode mode) {
  if (k < 0 || k > series.max_k())
    throw ContractError("mean_accuracy: series shorter than k+1");
  if (mode == MetricMode::kEquation) {
    if (k == 0) throw ContractError("mean_accuracy: k must be >= 1 in equation mode");
    double sum = 0;
    for (int i = 1; i <= k; ++i) sum += series.acc[i];
    return sum / static_cast<double>(k);
  }
  double sum = 0;
  for (int i = 0; i <= k; ++i) sum += series.acc[i];
  return sum / static_cast<double>(k + 1);
}

double accuracy_degradation(const MetricSeries& series, int k, MetricMode mode) {
  if (k < 0 || k > series.max_k())
    throw ContractError("accuracy_degradation: series shorter than k+1");
  if (mode == MetricMode::kEquation) {
    if (k == 0)
      throw ContractError("accuracy_degradation: k must be >= 1 in equation mode");
    if (series.acc[0] == 0)
      throw ContractError("accuracy_degradation: ACC_{+0} is zero in equation mode");
    double sum = 0;
    for (int i = 1; i <= k; ++i) sum += (series.acc[0] - series.acc[i]) / series.acc[0];
    return sum / static_cast<double>(k);
  }
  double sum = 0;
  for (int i = 1; i <= k; ++i) sum += series.acc[0] - series.acc[i];
  return sum;
}

std::vector<int> retrieve_topk(std::span<const double> query_embedding,
                               const std::vector<Doc>& database, int k) {
  if (k < 1 || k > static_cast<int>(database.size()))
    throw ContractError("retrieve_topk: k out of range for database size " +
                        std::to_string(database.size()));
  std::vector<std::pair<double, int>> scored;
  scored.reserve(database.size());
  for (int i = 0; i < static_cast<int>(database.size()); ++i) {
    const auto& e = database[i].embedding;
    if (e.size() != query_embedding.size())
      throw ContractError("retrieve_topk: embedding dimension mismatch");
    double s = 0;
    for (std::size_t d = 0; d < e.size(); ++d) s += e[d] * query_embedding[d];
    scored.emplace_back(s, i);
  }
  auto better = [&](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    if (a.first != b.first) return a.first > b.first;
    return database[a.second].doc_id < database[b.second].doc_id;
  };
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = scored[i].second;
  return out;
}

namespace {

constexpr std::uint64_t kPollutionStream = 0x706f6c6c;

std::string answer_name(const Vocabulary& vocab, int token) {
  return vocab.token_name(token);
}

double judge_instance(const CompletionGenerator& generator, const Vocabulary& vocab,
                      const Instance& presented, const Judge& judge) {
  const auto tokens = generator.generate(presented);
  const auto parsed = parse_completion(vocab, tokens, presented.sample_count());
  if (!parsed.ok()) return 0.0;  // format failures score zero
  const std::string question = "q" + std::to_string(presented.instance_id);
  const std::string gold = answer_name(vocab, presented.gold_answer_token(vocab));
  const std::string answer = answer_name(vocab, parsed.value->answer);
  return judge.judge(question, gold, answer).normalized();
}

}  // namespace

MetricSeries polluted_eval(const CompletionGenerator& generator,
                           const Vocabulary& vocab, const Dataset& dataset,
                           int k_max, const Judge& judge, std::uint64_t seed) {
  if (k_max < 0) throw ContractError("polluted_eval: k_max must be >= 0");
  if (k_max > vocab.max_samples() - 1)
    throw ContractError("polluted_eval: k_max leaves no room for helpful docs");

  // Harmful pool across the whole dataset, ordered by doc_id.
  struct PoolEntry {
    std::int64_t owner;
    const Doc* doc;
  };
  std::vector<PoolEntry> pool;
  for (const Instance& inst : dataset)
    for (const Doc& d : inst.docs)
      if (!d.helpful_gt) pool.push_back(PoolEntry{inst.instance_id, &d});
  std::sort(pool.begin(), pool.end(), [](const PoolEntry& a, const PoolEntry& b) {
    return a.doc->doc_id < b.doc->doc_id;
  });

  std::vector<const Instance*> subset;
  for (const Instance& inst : dataset) {
    if (!inst.answerable) continue;
    if (inst.helpful_count() + k_max > vocab.max_samples()) continue;
    subset.push_back(&inst);
  }
  if (subset.empty())
    throw ContractError("polluted_eval: no eligible answerable instances");

  MetricSeries series;
  series.acc.assign(static_cast<std::size_t>(k_max) + 1, 0.0);

  for (const Instance* base : subset) {
    // Fixed per-instance pollution sequence: own harmful docs, then draws
    // from other instances' harmful docs. Level k presents its prefix.
    std::vector<Doc> pollution;
    for (const Doc& d : base->docs)
      if (!d.helpful_gt) pollution.push_back(d);
    auto rng = substream(seed, kPollutionStream,
                         static_cast<std::uint64_t>(base->instance_id));
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pool[i].owner != base->instance_id) eligible.push_back(i);
    for (std::size_t j = 0;
         static_cast<int>(pollution.size()) < k_max && j < eligible.size(); ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, eligible.size() - 1);
      std::swap(eligible[j], eligible[pick(rng)]);
      pollution.push_back(*pool[eligible[j]].doc);
    }

    Instance presented;
    presented.instance_id = base->instance_id;
    presented.query_embedding = base->query_embedding;
    presented.gold_digit = base->gold_digit;
    presented.answerable = true;
    for (const Doc& d : base->docs)
      if (d.helpful_gt) presented.docs.push_back(d);

    for (int k = 0; k <= k_max; ++k) {
      Instance level = presented;
      for (int j = 0; j < k && j < static_cast<int>(pollution.size()); ++j)
        level.docs.push_back(pollution[j]);
      series.acc[k] += judge_instance(generator, vocab, level, judge);
    }
  }
  for (double& v : series.acc) v /= static_cast<double>(subset.size());
  return series;
}

double topk_eval(const CompletionGenerator& generator, const Vocabulary& vocab,
                 const Dataset& dataset, int k, const Judge& judge) {
  if (k < 1) throw ContractError("topk_eval: k must be >= 1");
  if (k > vocab.max_samples())
    throw ContractError("topk_eval: k exceeds the vocabulary's sample slots");

  std::vector<Doc> database;
  std::vector<std::int64_t> owner;
  for (const Instance& inst : dataset)
    for (const Doc& d : inst.docs) {
      database.push_back(d);
      owner.push_back(inst.instance_id);
    }
  if (k > static_cast<int>(database.size()))
    throw ContractError("topk_eval: k exceeds database size");

  double sum = 0;
  std::size_t count = 0;
  for (const Instance& base : dataset) {
    if (!base.answerable) continue;
    auto top = retrieve_topk(base.query_embedding, database, k);
    Instance presented;
    presented.instance_id = base.instance_id;
    presented.query_embedding = base.query_embedding;
    presented.gold_digit = base.gold_digit;
    presented.answerable = true;
    for (int idx : top) {
      Doc d = database[idx];
      // Helpfulness is query-relative: a doc retrieved for a different
      // question is harmful here no matter what its home label says.
      d.helpful_gt = owner[idx] == base.instance_id && d.helpful_gt;
      presented.docs.push_back(std::move(d));
    }
    sum += judge_instance(generator, vocab, presented, judge);
    ++count;
  }
  if (count == 0) throw ContractError("topk_eval: no answerable instances");
  return sum / static_cast<double>(count);
}

std::string series_to_csv(const MetricSeries& series) {
  std::string out = "k,acc\n";
  char buf[64];
  for (std::size_t i = 0; i < series.acc.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i, series.acc[i]);
    out += buf;
  }
  return out;
}

MetricSeries series_from_csv(const std::string& text) {
  MetricSeries out;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && !line.empty() && !std::isdigit(static_cast<unsigned char>(line[0])))
      continue;  // header
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw FormatError("line " + std::to_string(line_no) + ": expected k,acc");
    try {
      out.acc.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(line_no) + ": bad acc value");
    }
  }
  return out;
}

}  // namespace pgrpo
