#include <chrono>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "errors.hpp"
#include "eval.hpp"

namespace pgrpo {

RemoteJudge::RemoteJudge(RemoteJudgeOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty())
    throw ContractError("RemoteJudge: endpoint not configured");
}

JudgeVerdict RemoteJudge::judge(const std::string& question, const std::string& gold,
                                const std::string& answer) const {
  nlohmann::json body;
  body["question"] = question;
  body["gold"] = gold;
  body["answer"] = answer;
  const std::string payload = body.dump();

  std::string transport_error = "no attempt made";
  const int attempts = 1 + std::max(0, options_.retries);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const auto backoff = std::chrono::milliseconds(
          static_cast<long long>(options_.backoff_base_ms) << (attempt - 1));
      std::this_thread::sleep_for(backoff);
    }
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(0, options_.timeout_ms * 1000LL);
    client.set_read_timeout(0, options_.timeout_ms * 1000LL);
    auto res = client.Post("/score", payload, "application/json");
    if (!res) {
      transport_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      transport_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    // A delivered response is judged on protocol terms; no failover.
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
      throw RemoteError(std::string("judge returned malformed JSON: ") + e.what());
    }
    if (!parsed.contains("score") || !parsed["score"].is_number_integer())
      throw RemoteError("judge response missing integer 'score'");
    const int score = parsed["score"].get<int>();
    if (score < 0 || score > 5)
      throw RemoteError("judge score " + std::to_string(score) +
                        " outside the 0..5 range");
    return JudgeVerdict{score};
  }
  if (options_.failover_score0) {
    std::cerr << "warning: judge unreachable (" << transport_error
              << "); scoring 0\n";
    return JudgeVerdict{0};
  }
  throw RemoteError("judge unreachable after " + std::to_string(attempts) +
                    " attempts: " + transport_error);
}

}  // namespace pgrpo
