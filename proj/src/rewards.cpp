#include "rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "errors.hpp"

namespace pgrpo {

double format_reward(const Vocabulary& vocab, std::span<const int> tokens,
                     int sample_count) {
  if (sample_count < 1 || sample_count > vocab.max_samples()) return 0.0;
  return parse_completion(vocab, tokens, sample_count).ok() ? 1.0 : 0.0;
}

double helpfulness_reward(const ParsedCompletion& parsed,
                          std::span<const std::uint8_t> helpful_gt) {
  const std::size_t n = parsed.judgments.size();
  if (n == 0 || n != helpful_gt.size())
    throw ContractError("helpfulness_reward: judgment/ground-truth length mismatch");
  int matches = 0;
  for (std::size_t j = 0; j < n; ++j)
    if ((parsed.judgments[j] != 0) == (helpful_gt[j] != 0)) ++matches;
  return static_cast<double>(matches) / static_cast<double>(n);
}

double conclusion_reward(const ParsedCompletion& parsed) {
  const std::size_t n = parsed.judgments.size();
  if (n == 0) throw ContractError("conclusion_reward: no judgments");
  int matches = 0;
  for (std::size_t j = 0; j < n; ++j) {
    bool cited = std::binary_search(parsed.citations.begin(),
                                    parsed.citations.end(),
                                    static_cast<int>(j) + 1);
    if (cited == (parsed.judgments[j] != 0)) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(n);
}

double answer_reward(const ParsedCompletion& parsed, int gold_answer_token) {
  return parsed.answer == gold_answer_token ? 1.0 : 0.0;
}

namespace {
constexpr double kStdStabilizer = 1e-8;
}

std::vector<double> normalize_column(std::span<const double> column) {
  std::vector<std::uint8_t> all(column.size(), 1);
  return normalize_column_masked(column, all);
}

std::vector<double> normalize_column_masked(std::span<const double> column,
                                            std::span<const std::uint8_t> valid) {
  if (column.size() != valid.size())
    throw ContractError("normalize_column_masked: mask length mismatch");
  std::vector<double> out(column.size(), 0.0);
  std::size_t count = 0;
  double sum = 0;
  for (std::size_t i = 0; i < column.size(); ++i)
    if (valid[i]) {
      sum += column[i];
      ++count;
    }
  if (count < 2) return out;  // degenerate group: no relative signal
  bool all_equal = true;
  double first = 0;
  bool seen = false;
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (!valid[i]) continue;
    if (!seen) {
      first = column[i];
      seen = true;
    } else if (column[i] != first) {
      all_equal = false;
    }
  }
  if (all_equal) return out;  // zero spread normalizes to zero
  const double mean = sum / static_cast<double>(count);
  double var = 0;
  for (std::size_t i = 0; i < column.size(); ++i)
    if (valid[i]) var += (column[i] - mean) * (column[i] - mean);
  var /= static_cast<double>(count);
  const double sd = std::sqrt(var);
  if (sd == 0.0) return out;
  for (std::size_t i = 0; i < column.size(); ++i)
    if (valid[i]) out[i] = (column[i] - mean) / (sd + kStdStabilizer);
  return out;
}

std::vector<std::vector<double>> normalize_group(
    const std::vector<std::vector<double>>& raw) {
  const std::size_t rows = raw.size();
  if (rows < 2) throw ContractError("normalize_group: needs at least 2 completions");
  const std::size_t cols = raw.front().size();
  for (const auto& r : raw)
    if (r.size() != cols) throw ContractError("normalize_group: ragged matrix");

  std::vector<std::vector<double>> out(rows, std::vector<double>(cols, 0.0));
  std::vector<double> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < rows; ++i) column[i] = raw[i][c];
    auto normalized = normalize_column(column);
    for (std::size_t i = 0; i < rows; ++i) out[i][c] = normalized[i];
  }
  return out;
}

std::string reward_csv_header() {
  return "step,completion_idx,r_f,r_h,r_c,r_a,adv_h,adv_c,adv_f,adv_a\n";
}

std::string reward_csv_row(int step, int completion_idx, const RewardVector& raw,
                           double adv_h, double adv_c, double adv_f, double adv_a) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                step, completion_idx, raw.format, raw.helpfulness, raw.conclusion,
                raw.answer, adv_h, adv_c, adv_f, adv_a);
  return buf;
}

}  // namespace pgrpo
