#pragma once

#include <string>
#include <vector>

#include "ares/teacher.hpp"

namespace ares {

// Connection settings for a live teacher speaking the completion wire
// protocol (see http_complete).  The API key is never stored here -- only
// the name of the environment variable that holds it, so configs and
// manifests stay secret-free.
struct TeacherConfig {
  std::string endpoint_url;  // http://host[:port][/path]
  std::string api_key_env_var = "ARES_TEACHER_API_KEY";
  int max_retries = 3;
  double request_timeout_s = 30.0;
  int max_parallel_requests = 4;
  // Exponential-backoff base delay.  The production default is one second;
  // fault-injection tests shrink it so retries complete instantly.
  int backoff_base_ms = 1000;

  void validate() const;  // throws ConfigError
};

// One completion round-trip: POST {"request_id", "prompt", "max_tokens"}
// with "Authorization: Bearer <key>" (key read from the environment
// variable named by cfg); expects {"request_id", "completion"} back.
// Transient failures (transport errors, HTTP 429, 5xx) are retried up to
// cfg.max_retries times with exponential backoff (base backoff_base_ms,
// factor 2, full jitter); any other non-2xx status is terminal -- in
// particular, no 4xx other than 429 is ever retried.  Throws TeacherError
// with the last failure when retries are exhausted, and before any network
// activity when the credential is missing.
std::string http_complete(const TeacherConfig& cfg, const std::string& prompt);

// Teacher over the wire protocol.  Each call builds the prompt, requests a
// completion, and parses the reply; an unparseable reply is re-requested up
// to cfg.max_retries more times (a fresh completion may parse) before the
// item fails with TeacherError.  The batched variants fan out over at most
// cfg.max_parallel_requests worker threads; results stay aligned with the
// requests.
class HttpTeacher : public Teacher {
 public:
  explicit HttpTeacher(TeacherConfig cfg);

  ScoreResponse score(const Problem& p,
                      const std::vector<Sentence>& sentences) override;
  Rationale correct(const Problem& p, const Rationale& cleaned) override;
  JudgeChoice judge(const Problem& p, const Rationale& option_a,
                    const Rationale& option_b) override;

  std::vector<ScoreOutcome> score_many(
      const std::vector<ScoreRequest>& requests) override;
  std::vector<CorrectionOutcome> correct_many(
      const std::vector<CorrectionRequest>& requests) override;
  std::vector<JudgeOutcome> judge_many(
      const std::vector<JudgeRequest>& requests) override;

 private:
  TeacherConfig cfg_;
};

}  // namespace ares
