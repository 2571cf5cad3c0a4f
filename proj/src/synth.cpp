#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace pgrpo {

namespace {

constexpr std::uint64_t kInstanceStream = 0x696e7374;  // per-instance substreams

std::vector<double> unit_normalize(std::vector<double> v) {
  double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (norm > 0)
    for (double& x : v) x /= norm;
  return v;
}

int clamp_round(double x, int lo, int hi) {
  return std::clamp(static_cast<int>(std::lround(x)), lo, hi);
}

}  // namespace

int Instance::helpful_count() const {
  int h = 0;
  for (const Doc& d : docs) h += d.helpful_gt ? 1 : 0;
  return h;
}

int Instance::gold_answer_token(const Vocabulary& vocab) const {
  return gold_digit < 0 ? Vocabulary::kNoAnswer : vocab.digit_token(gold_digit);
}

int gold_answer_digit(const std::vector<Doc>& docs) {
  if (docs.empty()) throw ContractError("gold_answer_digit: no docs");
  int sum = 0;
  bool any = false;
  for (const Doc& d : docs) {
    if (d.helpful_gt) {
      sum += d.evidence_digit;
      any = true;
    }
  }
  return any ? sum % 10 : -1;
}

Dataset generate_dataset(const GenConfig& config) {
  if (config.num_instances <= 0) throw ContractError("num_instances must be positive");
  if (config.n_min < 1 || config.n_min > config.n_max)
    throw ContractError("doc count clamp out of order");
  if (config.cue_flip_prob < 0 || config.cue_flip_prob > 1)
    throw ContractError("cue_flip_prob must be in [0,1]");
  if (config.cue_bit_count < 1 || config.embed_dim < 1)
    throw ContractError("cue_bit_count and embed_dim must be positive");

  Dataset out;
  out.reserve(static_cast<std::size_t>(config.num_instances));
  std::int64_t next_doc_id = 0;

  for (std::int64_t i = 0; i < config.num_instances; ++i) {
    auto rng = substream(config.seed, kInstanceStream, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal01(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> digit(0, 9);

    Instance inst;
    inst.instance_id = i;

    std::normal_distribution<double> n_dist(config.n_mean, config.n_sd);
    const int n = clamp_round(n_dist(rng), config.n_min, config.n_max);
    std::normal_distribution<double> h_dist(config.helpful_mean, config.helpful_sd);
    const int h = clamp_round(h_dist(rng), 0, n);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint8_t> helpful(n, 0);
    for (int j = 0; j < h; ++j) helpful[order[j]] = 1;

    inst.query_embedding.resize(config.embed_dim);
    for (double& x : inst.query_embedding) x = normal01(rng);
    inst.query_embedding = unit_normalize(std::move(inst.query_embedding));

    inst.docs.resize(n);
    for (int j = 0; j < n; ++j) {
      Doc& d = inst.docs[j];
      d.doc_id = next_doc_id++;
      d.helpful_gt = helpful[j] != 0;
      d.evidence_digit = digit(rng);
      d.cue_bits.resize(config.cue_bit_count);
      for (auto& bit : d.cue_bits) {
        bool flip = unif(rng) < config.cue_flip_prob;
        bit = static_cast<std::uint8_t>(d.helpful_gt != flip ? 1 : 0);
      }
      d.embedding.resize(config.embed_dim);
      for (int k = 0; k < config.embed_dim; ++k)
        d.embedding[k] = config.embed_alpha * inst.query_embedding[k] +
                         (1.0 - config.embed_alpha) * normal01(rng);
      d.embedding = unit_normalize(std::move(d.embedding));
    }

    inst.gold_digit = gold_answer_digit(inst.docs);
    inst.answerable = inst.gold_digit >= 0;
    out.push_back(std::move(inst));
  }
  return out;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json instance_to_json(const Instance& inst) {
  ordered_json j;
  j["instance_id"] = inst.instance_id;
  j["n"] = inst.sample_count();
  j["gold_answer"] =
      inst.gold_digit < 0 ? "NOANS" : "a" + std::to_string(inst.gold_digit);
  j["answerable"] = inst.answerable;
  j["query_embedding"] = inst.query_embedding;
  ordered_json docs = ordered_json::array();
  for (const Doc& d : inst.docs) {
    ordered_json dj;
    dj["doc_id"] = d.doc_id;
    dj["helpful_gt"] = d.helpful_gt;
    dj["evidence_digit"] = d.evidence_digit;
    dj["cue_bits"] = d.cue_bits;
    dj["embedding"] = d.embedding;
    docs.push_back(std::move(dj));
  }
  j["docs"] = std::move(docs);
  return j;
}

Instance instance_from_json(const ordered_json& j) {
  Instance inst;
  inst.instance_id = j.at("instance_id").get<std::int64_t>();
  const int n = j.at("n").get<int>();
  std::string gold = j.at("gold_answer").get<std::string>();
  if (gold == "NOANS") {
    inst.gold_digit = -1;
  } else if (gold.size() == 2 && gold[0] == 'a' && gold[1] >= '0' && gold[1] <= '9') {
    inst.gold_digit = gold[1] - '0';
  } else {
    throw FormatError("bad gold_answer value '" + gold + "'");
  }
  inst.answerable = j.at("answerable").get<bool>();
  inst.query_embedding = j.at("query_embedding").get<std::vector<double>>();
  for (const auto& dj : j.at("docs")) {
    Doc d;
    d.doc_id = dj.at("doc_id").get<std::int64_t>();
    d.helpful_gt = dj.at("helpful_gt").get<bool>();
    d.evidence_digit = dj.at("evidence_digit").get<int>();
    d.cue_bits = dj.at("cue_bits").get<std::vector<std::uint8_t>>();
    d.embedding = dj.at("embedding").get<std::vector<double>>();
    inst.docs.push_back(std::move(d));
  }
  if (inst.sample_count() != n)
    throw FormatError("doc count does not match field n");
  if (inst.answerable != (inst.gold_digit >= 0))
    throw FormatError("answerable flag inconsistent with gold_answer");
  return inst;
}

}  // namespace

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const Instance& inst : dataset) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
  Dataset out;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(ordered_json::parse(line)));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << dataset_to_jsonl(dataset);
  if (!f) throw IoError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return dataset_from_jsonl(buf.str());
}

DatasetStats dataset_stats(const Dataset& dataset) {
  if (dataset.empty()) throw ContractError("dataset_stats: empty dataset");
  DatasetStats s;
  s.num_instances = static_cast<std::int64_t>(dataset.size());
  double sum_n = 0, sum_n2 = 0, sum_h = 0, sum_h2 = 0, answerable = 0;
  for (const Instance& inst : dataset) {
    double n = inst.sample_count();
    double h = inst.helpful_count();
    sum_n += n;
    sum_n2 += n * n;
    sum_h += h;
    sum_h2 += h * h;
    answerable += inst.answerable ? 1 : 0;
  }
  const double count = static_cast<double>(dataset.size());
  s.n_mean = sum_n / count;
  s.n_sd = std::sqrt(std::max(0.0, sum_n2 / count - s.n_mean * s.n_mean));
  s.helpful_mean = sum_h / count;
  s.helpful_sd =
      std::sqrt(std::max(0.0, sum_h2 / count - s.helpful_mean * s.helpful_mean));
  s.answerable_fraction = answerable / count;
  return s;
}

std::string dataset_stats_csv(const DatasetStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "metric,value\n"
                "num_instances,%lld\n"
                "n_mean,%.6f\n"
                "n_sd,%.6f\n"
                "helpful_mean,%.6f\n"
                "helpful_sd,%.6f\n"
                "answerable_fraction,%.6f\n",
                static_cast<long long>(s.num_instances), s.n_mean, s.n_sd,
                s.helpful_mean, s.helpful_sd, s.answerable_fraction);
  return buf;
}

}  // namespace pgrpo
