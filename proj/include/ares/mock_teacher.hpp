#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "ares/corpus.hpp"

namespace ares {

// Reference server for the completion wire protocol, backed by the
// scripted teacher.  It classifies each incoming prompt (score /
// correction / judge), recovers the problem by its Question line, answers
// from the gold rationale, and replies {"request_id", "completion"}.
// Requests it cannot serve -- unknown question, missing gold, malformed
// body, missing Authorization header -- get a 4xx with {"error": ...},
// which a well-behaved client treats as terminal.  Handlers are pure, so
// concurrent requests are safe.
class MockTeacherServer {
 public:
  // Problems are looked up by the first line of their question text, which
  // therefore must be unique within the corpus (throws CorpusError
  // otherwise).
  MockTeacherServer(Corpus corpus, std::uint64_t seed);
  ~MockTeacherServer();

  MockTeacherServer(const MockTeacherServer&) = delete;
  MockTeacherServer& operator=(const MockTeacherServer&) = delete;

  // Binds 127.0.0.1:port (0 picks a free port), serves on a background
  // thread, and returns the bound port once the server accepts requests.
  int start(int port = 0);
  void stop();

  int bound_port() const;
  std::string endpoint_url() const;  // http://127.0.0.1:<port>/complete

  // Serves on the calling thread until the process dies or stop() is
  // called from elsewhere; on_bound fires with the port once listening.
  void serve_forever(int port, const std::function<void(int)>& on_bound = {});

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ares
