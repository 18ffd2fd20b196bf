#include "ares/http_teacher.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/util.hpp"

namespace ares {

namespace {

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";
};

Endpoint parse_endpoint(const std::string& url) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme) {
    throw ConfigError(
        "teacher endpoint must be an http:// URL (TLS termination belongs to "
        "a local proxy), got '" +
        url + "'");
  }
  std::string rest = url.substr(kScheme.size());
  Endpoint ep;
  std::string hostport = rest;
  if (std::size_t slash = rest.find('/'); slash != std::string::npos) {
    hostport = rest.substr(0, slash);
    ep.path = rest.substr(slash);
  }
  ep.host = hostport;
  if (std::size_t colon = hostport.rfind(':'); colon != std::string::npos) {
    ep.host = hostport.substr(0, colon);
    const std::string port_text = hostport.substr(colon + 1);
    try {
      std::size_t used = 0;
      ep.port = std::stoi(port_text, &used);
      if (used != port_text.size() || ep.port < 1 || ep.port > 65535) {
        throw std::invalid_argument("range");
      }
    } catch (const std::exception&) {
      throw ConfigError("teacher endpoint has a bad port: '" + url + "'");
    }
  }
  if (ep.host.empty()) {
    throw ConfigError("teacher endpoint has no host: '" + url + "'");
  }
  return ep;
}

std::atomic<std::uint64_t> g_request_counter{0};

}  // namespace

void TeacherConfig::validate() const {
  if (endpoint_url.empty()) {
    throw ConfigError("teacher endpoint_url is empty");
  }
  if (api_key_env_var.empty()) {
    throw ConfigError("teacher api_key_env_var is empty");
  }
  if (max_retries < 0 || max_retries > 16) {
    throw ConfigError("teacher max_retries must be in [0, 16], got " +
                      std::to_string(max_retries));
  }
  if (max_parallel_requests < 1) {
    throw ConfigError("teacher max_parallel_requests must be >= 1, got " +
                      std::to_string(max_parallel_requests));
  }
  if (!(request_timeout_s > 0.0)) {
    throw ConfigError("teacher request_timeout_s must be positive");
  }
  if (backoff_base_ms < 0) {
    throw ConfigError("teacher backoff_base_ms must be >= 0");
  }
}

std::string http_complete(const TeacherConfig& cfg, const std::string& prompt) {
  cfg.validate();
  // Credential check comes before any network activity so a bad deployment
  // fails in microseconds, not after a connect timeout.
  const char* key = std::getenv(cfg.api_key_env_var.c_str());
  if (key == nullptr || *key == '\0') {
    throw TeacherError("teacher api key is not set; export " +
                       cfg.api_key_env_var);
  }
  const Endpoint ep = parse_endpoint(cfg.endpoint_url);

  const std::uint64_t req_no = g_request_counter.fetch_add(1);
  const std::string request_id = "req-" + to_hex(req_no);
  const std::string body = nlohmann::json{{"request_id", request_id},
                                          {"prompt", prompt},
                                          {"max_tokens", 512}}
                               .dump();

  httplib::Client client(ep.host, ep.port);
  const auto sec = static_cast<time_t>(cfg.request_timeout_s);
  const auto usec =
      static_cast<time_t>((cfg.request_timeout_s - static_cast<double>(sec)) *
                          1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  const httplib::Headers headers{
      {"Authorization", std::string("Bearer ") + key}};

  std::mt19937_64 jitter(mix_seed(0x626f6666u, req_no));  // per-request stream
  std::string last_failure;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      // Full jitter: a uniform draw from [0, base * 2^(attempt-1)).
      const double window_ms =
          static_cast<double>(cfg.backoff_base_ms) *
          std::ldexp(1.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          uniform_double(jitter) * window_ms));
    }

    httplib::Result res = client.Post(ep.path, headers, body,
                                      "application/json");
    if (!res) {
      last_failure =
          std::string("transport error: ") + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status >= 200 && status < 300) {
      nlohmann::json reply;
      try {
        reply = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw TeacherError(std::string("teacher reply is not valid JSON: ") +
                           e.what());
      }
      if (!reply.is_object() || !reply.contains("request_id") ||
          !reply["request_id"].is_string() || !reply.contains("completion") ||
          !reply["completion"].is_string()) {
        throw TeacherError(
            "teacher reply lacks string request_id/completion fields");
      }
      if (reply["request_id"].get<std::string>() != request_id) {
        throw TeacherError("teacher reply answers request '" +
                           reply["request_id"].get<std::string>() +
                           "', expected '" + request_id + "'");
      }
      return reply["completion"].get<std::string>();
    }
    if (status == 429 || status >= 500) {
      last_failure = "HTTP " + std::to_string(status);
      continue;
    }
    // Any other non-2xx is terminal; in particular no 4xx besides 429 is
    // ever retried.
    throw TeacherError("teacher request failed with HTTP " +
                       std::to_string(status) + ": " + res->body);
  }
  throw TeacherError("teacher request failed after " +
                     std::to_string(cfg.max_retries + 1) +
                     " attempt(s); last failure: " + last_failure);
}

// ---------------------------------------------------------------------------
// HttpTeacher
// ---------------------------------------------------------------------------

namespace {

// A completion that arrives but does not parse may be teacher flakiness,
// so the whole request is retried with the same prompt; a fresh completion
// often parses.  Transport-level retries happen inside http_complete with
// their own budget.
template <typename Parse>
auto complete_and_parse(const TeacherConfig& cfg, const std::string& prompt,
                        Parse parse) {
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    const std::string raw = http_complete(cfg, prompt);
    try {
      return parse(raw);
    } catch (const ParseError& e) {
      last_error = e.what();
    }
  }
  throw TeacherError("teacher reply stayed unparseable after " +
                     std::to_string(cfg.max_retries + 1) +
                     " request(s): " + last_error);
}

template <typename Out, typename Fn>
std::vector<Out> parallel_outcomes(std::size_t n, int max_workers, Fn fn) {
  std::vector<Out> out(n);
  if (n == 0) return out;

  auto run_one = [&fn](std::size_t i) -> Out {
    try {
      return fn(i);
    } catch (const Error& e) {
      Out failed;
      failed.ok = false;
      failed.error = e.what();
      return failed;
    } catch (const std::exception& e) {
      Out failed;
      failed.ok = false;
      failed.error = std::string("unexpected error: ") + e.what();
      return failed;
    }
  };

  const std::size_t workers =
      std::min(n, static_cast<std::size_t>(std::max(1, max_workers)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = run_one(i);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        out[i] = run_one(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return out;
}

}  // namespace

HttpTeacher::HttpTeacher(TeacherConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

ScoreResponse HttpTeacher::score(const Problem& p,
                                 const std::vector<Sentence>& sentences) {
  const std::string prompt = build_score_prompt(p, sentences);
  return complete_and_parse(cfg_, prompt, [&](const std::string& raw) {
    return parse_score_response(raw, sentences);
  });
}

Rationale HttpTeacher::correct(const Problem& p, const Rationale& cleaned) {
  const std::string prompt = build_correction_prompt(p, cleaned);
  return complete_and_parse(cfg_, prompt, [](const std::string& raw) {
    return parse_correction_response(raw);
  });
}

JudgeChoice HttpTeacher::judge(const Problem& p, const Rationale& option_a,
                               const Rationale& option_b) {
  const std::string prompt = build_judge_prompt(p, option_a, option_b);
  return complete_and_parse(cfg_, prompt, [](const std::string& raw) {
    return parse_judge_response(raw);
  });
}

std::vector<ScoreOutcome> HttpTeacher::score_many(
    const std::vector<ScoreRequest>& requests) {
  return parallel_outcomes<ScoreOutcome>(
      requests.size(), cfg_.max_parallel_requests, [&](std::size_t i) {
        ScoreOutcome out;
        out.response = score(*requests[i].problem, *requests[i].sentences);
        out.ok = true;
        return out;
      });
}

std::vector<CorrectionOutcome> HttpTeacher::correct_many(
    const std::vector<CorrectionRequest>& requests) {
  return parallel_outcomes<CorrectionOutcome>(
      requests.size(), cfg_.max_parallel_requests, [&](std::size_t i) {
        CorrectionOutcome out;
        out.corrected = correct(*requests[i].problem, *requests[i].cleaned);
        out.ok = true;
        return out;
      });
}

std::vector<JudgeOutcome> HttpTeacher::judge_many(
    const std::vector<JudgeRequest>& requests) {
  return parallel_outcomes<JudgeOutcome>(
      requests.size(), cfg_.max_parallel_requests, [&](std::size_t i) {
        JudgeOutcome out;
        out.verdict = judge(*requests[i].problem, *requests[i].option_a,
                            *requests[i].option_b);
        out.ok = true;
        return out;
      });
}

}  // namespace ares
