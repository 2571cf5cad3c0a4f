#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vocab.hpp"

namespace pgrpo {

// One retrieved document. `cue_bits` are noisy copies of `helpful_gt` (each
// independently flipped with the generator's flip probability); they are the
// only helpfulness signal visible to a policy.
struct Doc {
  std::int64_t doc_id = 0;
  bool helpful_gt = false;
  int evidence_digit = 0;  // 0..9
  std::vector<std::uint8_t> cue_bits;
  std::vector<double> embedding;
};

// A question with its retrieved documents. The gold answer is the sum of the
// helpful docs' evidence digits mod 10; with no helpful doc the question is
// unanswerable and the gold answer is NOANS.
struct Instance {
  std::int64_t instance_id = 0;
  std::vector<Doc> docs;
  std::vector<double> query_embedding;
  int gold_digit = -1;  // -1 encodes NOANS
  bool answerable = false;

  int sample_count() const { return static_cast<int>(docs.size()); }
  int helpful_count() const;
  int gold_answer_token(const Vocabulary& vocab) const;
};

using Dataset = std::vector<Instance>;

struct GenConfig {
  std::int64_t num_instances = 10000;
  double n_mean = 5.05;
  double n_sd = 1.06;
  int n_min = 2;
  int n_max = 8;
  double helpful_mean = 1.85;
  double helpful_sd = 1.36;
  double cue_flip_prob = 0.1;
  int cue_bit_count = 4;
  int embed_dim = 16;
  double embed_alpha = 0.8;
  std::uint64_t seed = 0;
};

// Digit-sum answer over the helpful docs; -1 (NOANS) when none is helpful.
int gold_answer_digit(const std::vector<Doc>& docs);

Dataset generate_dataset(const GenConfig& config);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);
std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(const std::string& text);

struct DatasetStats {
  std::int64_t num_instances = 0;
  double n_mean = 0, n_sd = 0;
  double helpful_mean = 0, helpful_sd = 0;
  double answerable_fraction = 0;
};

DatasetStats dataset_stats(const Dataset& dataset);
std::string dataset_stats_csv(const DatasetStats& stats);

}  // namespace pgrpo
