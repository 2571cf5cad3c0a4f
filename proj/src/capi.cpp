#include "pgrpo/pgrpo.h"

#include <cstring>
#include <memory>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "grpo.hpp"
#include "policy.hpp"
#include "rng.hpp"
#include "sft.hpp"
#include "synth.hpp"
#include "vocab.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pgrpo_status_t fail(pgrpo_status_t status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
pgrpo_status_t guarded(Fn&& fn) {
  try {
    fn();
    return PGRPO_OK;
  } catch (const pgrpo::ContractError& e) {
    return fail(PGRPO_ERR_INVALID_ARG, e.what());
  } catch (const pgrpo::IoError& e) {
    return fail(PGRPO_ERR_IO, e.what());
  } catch (const pgrpo::FormatError& e) {
    return fail(PGRPO_ERR_FORMAT, e.what());
  } catch (const pgrpo::NumericError& e) {
    return fail(PGRPO_ERR_NUMERIC, e.what());
  } catch (const pgrpo::RemoteError& e) {
    return fail(PGRPO_ERR_REMOTE, e.what());
  } catch (const std::exception& e) {
    return fail(PGRPO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PGRPO_ERR_INTERNAL, "unknown error");
  }
}

const pgrpo::Vocabulary& default_vocab() {
  static const pgrpo::Vocabulary vocab;
  return vocab;
}

std::unique_ptr<pgrpo::Judge> make_judge(const char* judge_url, int timeout_ms) {
  if (judge_url == nullptr || judge_url[0] == '\0')
    return std::make_unique<pgrpo::ExactJudge>();
  pgrpo::RemoteJudgeOptions opts;
  opts.endpoint = judge_url;
  if (timeout_ms > 0) opts.timeout_ms = timeout_ms;
  return std::make_unique<pgrpo::RemoteJudge>(std::move(opts));
}

}  // namespace

struct pgrpo_dataset_s {
  pgrpo::Dataset data;
};

struct pgrpo_policy_s {
  pgrpo::PolicyParams params;
  std::uint64_t seed = 0;
};

extern "C" {

const char* pgrpo_version(void) { return "0.1.0"; }

const char* pgrpo_status_name(pgrpo_status_t status) {
  switch (status) {
    case PGRPO_OK: return "ok";
    case PGRPO_ERR_INVALID_ARG: return "invalid_argument";
    case PGRPO_ERR_IO: return "io_error";
    case PGRPO_ERR_FORMAT: return "format_error";
    case PGRPO_ERR_NUMERIC: return "numeric_error";
    case PGRPO_ERR_REMOTE: return "remote_error";
    case PGRPO_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* pgrpo_last_error(void) { return g_last_error.c_str(); }

void pgrpo_string_free(char* s) { delete[] s; }

pgrpo_status_t pgrpo_vocab_manifest(char** manifest_out) {
  if (!manifest_out) return fail(PGRPO_ERR_INVALID_ARG, "manifest_out is null");
  return guarded([&] { *manifest_out = dup_string(default_vocab().manifest()); });
}

pgrpo_status_t pgrpo_dataset_generate(const char* gen_config_json,
                                      pgrpo_dataset_t** out) {
  if (!out) return fail(PGRPO_ERR_INVALID_ARG, "out is null");
  return guarded([&] {
    auto config =
        pgrpo::gen_config_from_json(gen_config_json ? gen_config_json : "");
    auto handle = std::make_unique<pgrpo_dataset_s>();
    handle->data = pgrpo::generate_dataset(config);
    *out = handle.release();
  });
}

pgrpo_status_t pgrpo_dataset_read(const char* path, pgrpo_dataset_t** out) {
  if (!out || !path) return fail(PGRPO_ERR_INVALID_ARG, "path/out is null");
  return guarded([&] {
    auto handle = std::make_unique<pgrpo_dataset_s>();
    handle->data = pgrpo::read_dataset(path);
    *out = handle.release();
  });
}

pgrpo_status_t pgrpo_dataset_write(const pgrpo_dataset_t* dataset,
                                   const char* path) {
  if (!dataset || !path) return fail(PGRPO_ERR_INVALID_ARG, "dataset/path is null");
  return guarded([&] { pgrpo::write_dataset(dataset->data, path); });
}

int64_t pgrpo_dataset_size(const pgrpo_dataset_t* dataset) {
  return dataset ? static_cast<int64_t>(dataset->data.size()) : -1;
}

pgrpo_status_t pgrpo_dataset_stats_csv(const pgrpo_dataset_t* dataset,
                                       char** csv_out) {
  if (!dataset || !csv_out)
    return fail(PGRPO_ERR_INVALID_ARG, "dataset/csv_out is null");
  return guarded([&] {
    *csv_out = dup_string(pgrpo::dataset_stats_csv(pgrpo::dataset_stats(dataset->data)));
  });
}

void pgrpo_dataset_free(pgrpo_dataset_t* dataset) { delete dataset; }

pgrpo_status_t pgrpo_policy_create(uint64_t seed, pgrpo_policy_t** out) {
  if (!out) return fail(PGRPO_ERR_INVALID_ARG, "out is null");
  return guarded([&] {
    auto handle = std::make_unique<pgrpo_policy_s>();
    handle->params = pgrpo::init_params(
        seed, pgrpo::default_policy_dims(default_vocab(), /*cue_bit_count=*/4));
    handle->seed = seed;
    *out = handle.release();
  });
}

pgrpo_status_t pgrpo_policy_load(const char* path, pgrpo_policy_t** out) {
  if (!out || !path) return fail(PGRPO_ERR_INVALID_ARG, "path/out is null");
  return guarded([&] {
    auto handle = std::make_unique<pgrpo_policy_s>();
    handle->params = pgrpo::load_checkpoint(path, default_vocab());
    *out = handle.release();
  });
}

pgrpo_status_t pgrpo_policy_save(const pgrpo_policy_t* policy, const char* path) {
  if (!policy || !path) return fail(PGRPO_ERR_INVALID_ARG, "policy/path is null");
  return guarded(
      [&] { pgrpo::save_checkpoint(policy->params, path, default_vocab(), policy->seed); });
}

void pgrpo_policy_free(pgrpo_policy_t* policy) { delete policy; }

pgrpo_status_t pgrpo_sft_run(pgrpo_policy_t* policy, const pgrpo_dataset_t* dataset,
                             const char* sft_config_json, char** log_csv_out) {
  if (!policy || !dataset)
    return fail(PGRPO_ERR_INVALID_ARG, "policy/dataset is null");
  return guarded([&] {
    auto config =
        pgrpo::sft_config_from_json(sft_config_json ? sft_config_json : "");
    std::string log;
    pgrpo::warmup(policy->params, default_vocab(), dataset->data, config,
                  log_csv_out ? &log : nullptr);
    if (log_csv_out) *log_csv_out = dup_string(log);
  });
}

pgrpo_status_t pgrpo_train_run(pgrpo_policy_t* policy, const pgrpo_dataset_t* dataset,
                               const char* train_config_json, char** log_csv_out,
                               char** reward_log_csv_out) {
  if (!policy || !dataset)
    return fail(PGRPO_ERR_INVALID_ARG, "policy/dataset is null");
  return guarded([&] {
    auto config =
        pgrpo::train_config_from_json(train_config_json ? train_config_json : "");
    pgrpo::TrainLog log;
    log.capture_rewards = reward_log_csv_out != nullptr;
    pgrpo::train_loop(policy->params, default_vocab(), dataset->data, config, &log);
    if (log_csv_out) *log_csv_out = dup_string(log.to_csv());
    if (reward_log_csv_out) *reward_log_csv_out = dup_string(log.reward_rows);
  });
}

pgrpo_status_t pgrpo_eval_polluted(const pgrpo_policy_t* policy,
                                   const pgrpo_dataset_t* dataset, int k_max,
                                   uint64_t seed, const char* judge_url,
                                   int judge_timeout_ms, char** series_csv_out) {
  if (!policy || !dataset || !series_csv_out)
    return fail(PGRPO_ERR_INVALID_ARG, "policy/dataset/series_csv_out is null");
  return guarded([&] {
    auto judge = make_judge(judge_url, judge_timeout_ms);
    pgrpo::GreedyPolicyGenerator generator(policy->params, default_vocab());
    auto series = pgrpo::polluted_eval(generator, default_vocab(), dataset->data,
                                       k_max, *judge, seed);
    *series_csv_out = dup_string(pgrpo::series_to_csv(series));
  });
}

pgrpo_status_t pgrpo_eval_topk(const pgrpo_policy_t* policy,
                               const pgrpo_dataset_t* dataset, int k,
                               const char* judge_url, int judge_timeout_ms,
                               double* accuracy_out) {
  if (!policy || !dataset || !accuracy_out)
    return fail(PGRPO_ERR_INVALID_ARG, "policy/dataset/accuracy_out is null");
  return guarded([&] {
    auto judge = make_judge(judge_url, judge_timeout_ms);
    pgrpo::GreedyPolicyGenerator generator(policy->params, default_vocab());
    *accuracy_out =
        pgrpo::topk_eval(generator, default_vocab(), dataset->data, k, *judge);
  });
}

pgrpo_status_t pgrpo_metrics_mean_accuracy(const double* acc, int64_t len, int k,
                                           int table_mode, double* out) {
  if (!acc || !out || len < 1)
    return fail(PGRPO_ERR_INVALID_ARG, "acc/out is null or len < 1");
  return guarded([&] {
    pgrpo::MetricSeries series;
    series.acc.assign(acc, acc + len);
    *out = pgrpo::mean_accuracy(series, k,
                                table_mode ? pgrpo::MetricMode::kTable
                                           : pgrpo::MetricMode::kEquation);
  });
}

pgrpo_status_t pgrpo_metrics_degradation(const double* acc, int64_t len, int k,
                                         int table_mode, double* out) {
  if (!acc || !out || len < 1)
    return fail(PGRPO_ERR_INVALID_ARG, "acc/out is null or len < 1");
  return guarded([&] {
    pgrpo::MetricSeries series;
    series.acc.assign(acc, acc + len);
    *out = pgrpo::accuracy_degradation(series, k,
                                       table_mode ? pgrpo::MetricMode::kTable
                                                  : pgrpo::MetricMode::kEquation);
  });
}

}  // extern "C"
