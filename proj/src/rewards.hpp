#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grammar.hpp"
#include "vocab.hpp"

namespace pgrpo {

// Raw rewards for one completion. helpfulness and conclusion are means of n
// binary sub-rewards; format and answer are binary.
struct RewardVector {
  double format = 0;
  double helpfulness = 0;
  double conclusion = 0;
  double answer = 0;
};

// Group-normalized rewards, one column per reward type, one row per
// completion.
struct AdvantageMatrix {
  std::vector<double> helpfulness;
  std::vector<double> conclusion;
  std::vector<double> format;
  std::vector<double> answer;
};

// 1 iff the tokens parse against the grammar for this sample count.
double format_reward(const Vocabulary& vocab, std::span<const int> tokens,
                     int sample_count);

// Fraction of samples whose judgment matches ground truth.
double helpfulness_reward(const ParsedCompletion& parsed,
                          std::span<const std::uint8_t> helpful_gt);

// Fraction of samples whose citation status matches the completion's own
// judgment; ground truth plays no role here.
double conclusion_reward(const ParsedCompletion& parsed);

// 1 iff the final answer token equals the gold token (NOANS matches NOANS).
double answer_reward(const ParsedCompletion& parsed, int gold_answer_token);

// Column-wise group normalization: (r - mean) / (std + 1e-8) with population
// std; a zero-spread column normalizes to all zeros. Input is row-major
// G x R; requires G >= 2.
std::vector<std::vector<double>> normalize_group(
    const std::vector<std::vector<double>>& raw);

// Same normalization over one column restricted to rows with valid[i] != 0;
// excluded rows get 0. Used by the trainer so that unassessable completions
// do not contaminate the group statistics of the segment rewards.
std::vector<double> normalize_column(std::span<const double> column);
std::vector<double> normalize_column_masked(std::span<const double> column,
                                            std::span<const std::uint8_t> valid);

// One per-completion log row:
// step,completion_idx,r_f,r_h,r_c,r_a,adv_h,adv_c,adv_f,adv_a
std::string reward_csv_header();
std::string reward_csv_row(int step, int completion_idx, const RewardVector& raw,
                           double adv_h, double adv_c, double adv_f, double adv_a);

}  // namespace pgrpo
