#include "config.hpp"

#include <set>

#include <json.hpp>

#include "errors.hpp"

namespace pgrpo {

namespace {

using nlohmann::json;

json parse_object(const std::string& text, const char* what) {
  json j;
  try {
    j = json::parse(text.empty() ? "{}" : text);
  } catch (const std::exception& e) {
    throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw FormatError(std::string(what) + ": expected an object");
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw FormatError(std::string(what) + ": unknown field '" + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const std::exception&) {
      throw FormatError(std::string("field '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

GenConfig gen_config_from_json(const std::string& text) {
  json j = parse_object(text, "gen config");
  reject_unknown(j,
                 {"num_instances", "n_mean", "n_sd", "n_min", "n_max",
                  "helpful_mean", "helpful_sd", "cue_flip_prob", "cue_bit_count",
                  "embed_dim", "embed_alpha", "seed"},
                 "gen config");
  GenConfig c;
  read(j, "num_instances", c.num_instances);
  read(j, "n_mean", c.n_mean);
  read(j, "n_sd", c.n_sd);
  read(j, "n_min", c.n_min);
  read(j, "n_max", c.n_max);
  read(j, "helpful_mean", c.helpful_mean);
  read(j, "helpful_sd", c.helpful_sd);
  read(j, "cue_flip_prob", c.cue_flip_prob);
  read(j, "cue_bit_count", c.cue_bit_count);
  read(j, "embed_dim", c.embed_dim);
  read(j, "embed_alpha", c.embed_alpha);
  read(j, "seed", c.seed);
  return c;
}

SftConfig sft_config_from_json(const std::string& text) {
  json j = parse_object(text, "sft config");
  reject_unknown(j, {"data_fraction", "steps", "lr", "seed"}, "sft config");
  SftConfig c;
  read(j, "data_fraction", c.data_fraction);
  read(j, "steps", c.steps);
  read(j, "lr", c.learning_rate);
  read(j, "seed", c.seed);
  return c;
}

TrainConfig train_config_from_json(const std::string& text) {
  json j = parse_object(text, "train config");
  reject_unknown(j,
                 {"G", "lr", "updates", "clip_eps", "kl_beta", "seed", "mode",
                  "rewards", "grpo_weights", "max_len", "format_gating",
                  "grammar_mask"},
                 "train config");
  TrainConfig c;
  read(j, "G", c.group_size);
  read(j, "lr", c.learning_rate);
  read(j, "updates", c.updates);
  read(j, "clip_eps", c.clip_epsilon);
  read(j, "kl_beta", c.kl_beta);
  read(j, "seed", c.seed);
  read(j, "max_len", c.max_len);
  read(j, "format_gating", c.format_gating);
  read(j, "grammar_mask", c.grammar_mask);
  if (j.contains("mode")) {
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "grpo")
      c.mode = TrainMode::kGrpo;
    else if (mode == "pgrpo")
      c.mode = TrainMode::kPartialGrpo;
    else
      throw FormatError("train config: mode must be 'grpo' or 'pgrpo'");
  }
  if (j.contains("rewards")) {
    const json& r = j.at("rewards");
    reject_unknown(r, {"format", "helpfulness", "conclusion", "answer"},
                   "train config rewards");
    read(r, "format", c.rewards.format);
    read(r, "helpfulness", c.rewards.helpfulness);
    read(r, "conclusion", c.rewards.conclusion);
    read(r, "answer", c.rewards.answer);
  }
  if (j.contains("grpo_weights")) {
    const json& w = j.at("grpo_weights");
    reject_unknown(w, {"format", "helpfulness", "conclusion", "answer"},
                   "train config grpo_weights");
    read(w, "format", c.grpo_weights.format);
    read(w, "helpfulness", c.grpo_weights.helpfulness);
    read(w, "conclusion", c.grpo_weights.conclusion);
    read(w, "answer", c.grpo_weights.answer);
  }
  return c;
}

}  // namespace pgrpo
