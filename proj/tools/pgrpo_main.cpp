// Command-line front end. Everything of substance goes through the C API in
// pgrpo/pgrpo.h; this file only parses flags, shuttles files, and formats
// output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgrpo/pgrpo.h"

namespace {

namespace fs = std::filesystem;

struct CliError {
  int exit_code;
  std::string message;
};

void check(pgrpo_status_t status) {
  if (status == PGRPO_OK) return;
  int code = 1;
  if (status == PGRPO_ERR_INVALID_ARG) code = 1;
  throw CliError{code, std::string(pgrpo_status_name(status)) + ": " +
                           pgrpo_last_error()};
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CliError{1, "cannot open: " + path};
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (!path.empty()) {
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliError{1, "cannot open for writing: " + path};
  f << content;
  if (!f) throw CliError{1, "write failed: " + path};
}

std::string read_config(const std::string& path) {
  return path.empty() ? std::string("{}") : read_file(path);
}

// Owned C string from the library.
struct LibString {
  char* ptr = nullptr;
  ~LibString() { pgrpo_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

struct DatasetHandle {
  pgrpo_dataset_t* ptr = nullptr;
  ~DatasetHandle() { pgrpo_dataset_free(ptr); }
};

struct PolicyHandle {
  pgrpo_policy_t* ptr = nullptr;
  ~PolicyHandle() { pgrpo_policy_free(ptr); }
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw CliError{1, "no such file: " + path};
}

uint64_t config_seed(const std::string& config_json) {
  try {
    auto j = nlohmann::json::parse(config_json);
    if (j.contains("seed")) return j.at("seed").get<uint64_t>();
  } catch (...) {
  }
  return 0;
}

// Every file-writing run leaves a manifest next to its primary output.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, std::string config_path, uint64_t seed,
                 std::string out_path)
      : command_(std::move(command)),
        config_path_(std::move(config_path)),
        seed_(seed),
        out_path_(std::move(out_path)),
        start_(std::chrono::steady_clock::now()) {}

  ~ManifestWriter() {
    if (out_path_.empty()) return;
    try {
      nlohmann::ordered_json j;
      j["command"] = command_;
      j["config"] = config_path_;
      j["seed"] = seed_;
      j["out"] = out_path_;
      j["version"] = pgrpo_version();
      j["duration_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
              .count();
      std::ofstream f(out_path_ + ".manifest.json", std::ios::binary);
      f << j.dump(2) << '\n';
    } catch (...) {
    }
  }

 private:
  std::string command_, config_path_;
  uint64_t seed_;
  std::string out_path_;
  std::chrono::steady_clock::time_point start_;
};

const char* judge_url_from_env() {
  const char* url = std::getenv("JUDGE_URL");
  return (url && url[0]) ? url : nullptr;
}

int run(int argc, char** argv) {
  CLI::App app{"Segment-scoped group-relative policy optimization testbed"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pgrpo_version());

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_config, gen_out, gen_stats;
  gen->add_option("--config", gen_config, "generator config JSON");
  gen->add_option("--out", gen_out, "output dataset (JSON lines)")->required();
  gen->add_option("--stats", gen_stats, "also write summary statistics CSV");

  // sft
  auto* sft = app.add_subcommand("sft", "stage-I supervised warm-up");
  std::string sft_data, sft_config, sft_out, sft_log;
  sft->add_option("--data", sft_data, "dataset path")->required();
  sft->add_option("--config", sft_config, "sft config JSON");
  sft->add_option("--out", sft_out, "output checkpoint")->required();
  sft->add_option("--log", sft_log, "loss log CSV");

  // train
  auto* train = app.add_subcommand("train", "stage-II preference optimization");
  std::string train_mode, train_data, train_init, train_config, train_out,
      train_log, train_reward_log;
  train->add_option("--mode", train_mode, "grpo or pgrpo")
      ->check(CLI::IsMember({"grpo", "pgrpo"}));
  train->add_option("--data", train_data, "dataset path")->required();
  train->add_option("--init", train_init, "initial checkpoint (fresh policy if omitted)");
  train->add_option("--config", train_config, "train config JSON");
  train->add_option("--out", train_out, "output checkpoint")->required();
  train->add_option("--log", train_log, "per-update log CSV");
  train->add_option("--reward-log", train_reward_log,
                    "per-completion reward breakdown CSV");

  // eval-polluted
  auto* evalp = app.add_subcommand("eval-polluted",
                                   "accuracy under incremental harmful docs");
  std::string evalp_ckpt, evalp_data, evalp_out;
  int evalp_kmax = 5;
  uint64_t evalp_seed = 0;
  int judge_timeout_ms = 5000;
  evalp->add_option("--ckpt", evalp_ckpt, "policy checkpoint")->required();
  evalp->add_option("--data", evalp_data, "dataset path")->required();
  evalp->add_option("--kmax", evalp_kmax, "maximum injected harmful docs");
  evalp->add_option("--seed", evalp_seed, "pollution draw seed");
  evalp->add_option("--out", evalp_out, "series CSV (k,acc)")->required();
  evalp->add_option("--judge-timeout-ms", judge_timeout_ms, "remote judge timeout");

  // eval-topk
  auto* evalt = app.add_subcommand("eval-topk", "accuracy with retrieved top-K docs");
  std::string evalt_ckpt, evalt_data, evalt_out;
  int evalt_k = 5;
  evalt->add_option("--ckpt", evalt_ckpt, "policy checkpoint")->required();
  evalt->add_option("--data", evalt_data, "dataset path")->required();
  evalt->add_option("--K", evalt_k, "number of retrieved docs")->required();
  evalt->add_option("--out", evalt_out, "output CSV (K,acc)")->required();
  evalt->add_option("--judge-timeout-ms", judge_timeout_ms, "remote judge timeout");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "MA/ADR over an accuracy series");
  std::string metrics_series, metrics_mode = "table", metrics_out;
  int metrics_k = 5;
  metrics->add_option("--series", metrics_series, "series CSV (k,acc)")->required();
  metrics->add_option("--k", metrics_k, "pollution level");
  metrics->add_option("--mode", metrics_mode, "equation or table")
      ->check(CLI::IsMember({"equation", "table"}));
  metrics->add_option("--out", metrics_out, "also write metric,mode,value CSV");

  // report
  auto* report = app.add_subcommand("report", "aggregate series CSVs into a table");
  std::string report_runs, report_out, report_mode = "table";
  int report_k = 5;
  report->add_option("--runs", report_runs, "directory of series CSVs")->required();
  report->add_option("--out", report_out, "output CSV")->required();
  report->add_option("--k", report_k, "pollution level");
  report->add_option("--mode", report_mode, "equation or table")
      ->check(CLI::IsMember({"equation", "table"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  if (gen->parsed()) {
    std::string config = read_config(gen_config);
    ManifestWriter manifest("gen-data", gen_config, config_seed(config), gen_out);
    DatasetHandle ds;
    check(pgrpo_dataset_generate(config.c_str(), &ds.ptr));
    check(pgrpo_dataset_write(ds.ptr, gen_out.c_str()));
    LibString vocab;
    check(pgrpo_vocab_manifest(&vocab.ptr));
    write_file(gen_out + ".vocab.tsv", vocab.str());
    if (!gen_stats.empty()) {
      LibString stats;
      check(pgrpo_dataset_stats_csv(ds.ptr, &stats.ptr));
      write_file(gen_stats, stats.str());
    }
    std::cout << "wrote " << pgrpo_dataset_size(ds.ptr) << " instances to "
              << gen_out << "\n";
    return 0;
  }

  if (sft->parsed()) {
    require_file(sft_data);
    std::string config = read_config(sft_config);
    ManifestWriter manifest("sft", sft_config, config_seed(config), sft_out);
    DatasetHandle ds;
    check(pgrpo_dataset_read(sft_data.c_str(), &ds.ptr));
    PolicyHandle policy;
    check(pgrpo_policy_create(config_seed(config), &policy.ptr));
    LibString log;
    check(pgrpo_sft_run(policy.ptr, ds.ptr, config.c_str(), &log.ptr));
    check(pgrpo_policy_save(policy.ptr, sft_out.c_str()));
    if (!sft_log.empty()) write_file(sft_log, log.str());
    std::cout << "wrote checkpoint " << sft_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    require_file(train_data);
    std::string config = read_config(train_config);
    if (!train_mode.empty()) {
      auto j = nlohmann::json::parse(config);
      j["mode"] = train_mode;
      config = j.dump();
    }
    ManifestWriter manifest("train", train_config, config_seed(config), train_out);
    DatasetHandle ds;
    check(pgrpo_dataset_read(train_data.c_str(), &ds.ptr));
    PolicyHandle policy;
    if (train_init.empty()) {
      check(pgrpo_policy_create(config_seed(config), &policy.ptr));
    } else {
      require_file(train_init);
      check(pgrpo_policy_load(train_init.c_str(), &policy.ptr));
    }
    LibString log, reward_log;
    check(pgrpo_train_run(policy.ptr, ds.ptr, config.c_str(), &log.ptr,
                          train_reward_log.empty() ? nullptr : &reward_log.ptr));
    check(pgrpo_policy_save(policy.ptr, train_out.c_str()));
    if (!train_log.empty()) write_file(train_log, log.str());
    if (!train_reward_log.empty()) write_file(train_reward_log, reward_log.str());
    std::cout << "wrote checkpoint " << train_out << "\n";
    return 0;
  }

  if (evalp->parsed()) {
    require_file(evalp_ckpt);
    require_file(evalp_data);
    ManifestWriter manifest("eval-polluted", "", evalp_seed, evalp_out);
    DatasetHandle ds;
    check(pgrpo_dataset_read(evalp_data.c_str(), &ds.ptr));
    PolicyHandle policy;
    check(pgrpo_policy_load(evalp_ckpt.c_str(), &policy.ptr));
    LibString series_csv;
    check(pgrpo_eval_polluted(policy.ptr, ds.ptr, evalp_kmax, evalp_seed,
                              judge_url_from_env(), judge_timeout_ms,
                              &series_csv.ptr));
    write_file(evalp_out, series_csv.str());

    // Parse the acc column back out for the printed summary.
    std::vector<double> acc;
    std::istringstream is(series_csv.str());
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      auto comma = line.find(',');
      if (comma != std::string::npos) acc.push_back(std::stod(line.substr(comma + 1)));
    }
    double ma = 0, adr = 0;
    check(pgrpo_metrics_mean_accuracy(acc.data(), (int64_t)acc.size(), evalp_kmax,
                                      1, &ma));
    check(pgrpo_metrics_degradation(acc.data(), (int64_t)acc.size(), evalp_kmax, 1,
                                    &adr));
    std::printf("metric,value\nMA_%d,%.2f\nADR_%d,%.2f\n", evalp_kmax, ma,
                evalp_kmax, adr);
    return 0;
  }

  if (evalt->parsed()) {
    require_file(evalt_ckpt);
    require_file(evalt_data);
    ManifestWriter manifest("eval-topk", "", 0, evalt_out);
    DatasetHandle ds;
    check(pgrpo_dataset_read(evalt_data.c_str(), &ds.ptr));
    PolicyHandle policy;
    check(pgrpo_policy_load(evalt_ckpt.c_str(), &policy.ptr));
    double acc = 0;
    check(pgrpo_eval_topk(policy.ptr, ds.ptr, evalt_k, judge_url_from_env(),
                          judge_timeout_ms, &acc));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "K,acc\n%d,%.6f\n", evalt_k, acc);
    write_file(evalt_out, buf);
    std::printf("ACC_Top-%d,%.2f\n", evalt_k, acc);
    return 0;
  }

  if (metrics->parsed()) {
    require_file(metrics_series);
    std::vector<double> acc;
    {
      std::istringstream is(read_file(metrics_series));
      std::string line;
      int line_no = 0;
      while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && !std::isdigit((unsigned char)line[0])) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
          throw CliError{1, metrics_series + ": line " + std::to_string(line_no) +
                                ": expected k,acc"};
        acc.push_back(std::stod(line.substr(comma + 1)));
      }
    }
    const int table = metrics_mode == "table" ? 1 : 0;
    double ma = 0, adr = 0;
    check(pgrpo_metrics_mean_accuracy(acc.data(), (int64_t)acc.size(), metrics_k,
                                      table, &ma));
    check(pgrpo_metrics_degradation(acc.data(), (int64_t)acc.size(), metrics_k,
                                    table, &adr));
    std::printf("metric,value\nMA_%d,%.2f\nADR_%d,%.2f\n", metrics_k, ma,
                metrics_k, adr);
    if (!metrics_out.empty()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "metric,mode,value\nMA_%d,%s,%.2f\nADR_%d,%s,%.2f\n",
                    metrics_k, metrics_mode.c_str(), ma, metrics_k,
                    metrics_mode.c_str(), adr);
      ManifestWriter manifest("metrics", "", 0, metrics_out);
      write_file(metrics_out, buf);
    }
    return 0;
  }

  if (report->parsed()) {
    if (!fs::is_directory(report_runs))
      throw CliError{1, "no such directory: " + report_runs};
    ManifestWriter manifest("report", "", 0, report_out);
    const int table = report_mode == "table" ? 1 : 0;

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(report_runs))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::ostringstream out;
    out << "method";
    for (int i = 0; i <= report_k; ++i) out << ",acc_plus" << i;
    out << ",ma_" << report_k << ",adr_" << report_k << "\n";
    int rows = 0;
    for (const auto& file : files) {
      std::vector<double> acc;
      std::istringstream is(read_file(file.string()));
      std::string line;
      int line_no = 0;
      bool bad = false;
      while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("k,", 0) == 0) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) {
          bad = true;
          break;
        }
        try {
          acc.push_back(std::stod(line.substr(comma + 1)));
        } catch (...) {
          bad = true;
          break;
        }
      }
      if (bad || (int)acc.size() < report_k + 1) continue;  // not a series file
      double ma = 0, adr = 0;
      check(pgrpo_metrics_mean_accuracy(acc.data(), (int64_t)acc.size(), report_k,
                                        table, &ma));
      check(pgrpo_metrics_degradation(acc.data(), (int64_t)acc.size(), report_k,
                                      table, &adr));
      out << file.stem().string();
      char buf[32];
      for (int i = 0; i <= report_k; ++i) {
        std::snprintf(buf, sizeof(buf), ",%.2f", acc[i]);
        out << buf;
      }
      std::snprintf(buf, sizeof(buf), ",%.2f,%.2f\n", ma, adr);
      out << buf;
      ++rows;
    }
    write_file(report_out, out.str());
    std::cout << "wrote " << rows << " rows to " << report_out << "\n";
    return 0;
  }

  std::cerr << app.help();
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
