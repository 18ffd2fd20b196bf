#include "ares/mock_teacher.hpp"

#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/teacher.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;

namespace {

// The Question line a prompt carries is the first line of the problem's
// question text, so that is the lookup key.
std::string question_key(const std::string& question) {
  const std::size_t nl = question.find('\n');
  return nl == std::string::npos ? question : question.substr(0, nl);
}

}  // namespace

struct MockTeacherServer::Impl {
  Corpus corpus;
  std::unordered_map<std::string, const Problem*> by_question;
  std::uint64_t seed = 0;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  const Problem& problem_for(const std::string& prompt) const {
    const std::string key = question_key(read_prompt_question(prompt));
    auto it = by_question.find(key);
    if (it == by_question.end()) {
      throw TeacherError("no corpus problem with question '" + key + "'");
    }
    return *it->second;
  }

  static const Rationale& require_gold(const Problem& p) {
    if (!p.gold_rationale.has_value()) {
      throw TeacherError("problem '" + p.id + "' has no gold rationale");
    }
    return *p.gold_rationale;
  }

  // The prompt kinds carry unmistakable structural markers: judge prompts
  // an OPTION A slot, correction prompts an original_rationale block, and
  // score prompts only a trailing key/xxx object.
  std::string answer(const std::string& prompt) const {
    const Problem& p = problem_for(prompt);
    const Rationale& gold = require_gold(p);
    if (prompt.find("\nOPTION A: ") != std::string::npos) {
      auto [left, right] = read_judge_prompt_options(prompt);
      return scripted_judge(p, left, right, seed) == JudgeChoice::kA ? "A"
                                                                     : "B";
    }
    if (prompt.find("original_rationale") != std::string::npos) {
      Rationale candidate = read_correction_prompt_rationale(prompt);
      return render_correction_response(scripted_correct(gold, candidate));
    }
    std::vector<Sentence> sentences = read_score_prompt_sentences(prompt);
    ScoreResponse scores = scripted_score(gold, Rationale{sentences});
    return render_score_response(sentences, scores);
  }

  void handle(const httplib::Request& req, httplib::Response& res) const {
    auto fail = [&res](int status, const std::string& message) {
      res.status = status;
      res.set_content(json{{"error", message}}.dump(), "application/json");
    };
    if (req.get_header_value("Authorization").empty()) {
      fail(401, "missing Authorization header");
      return;
    }
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      fail(400, std::string("request body is not valid JSON: ") + e.what());
      return;
    }
    if (!body.is_object() || !body.contains("request_id") ||
        !body["request_id"].is_string() || !body.contains("prompt") ||
        !body["prompt"].is_string() || !body.contains("max_tokens") ||
        !body["max_tokens"].is_number_integer()) {
      fail(400, "request needs request_id (string), prompt (string), "
                "max_tokens (integer)");
      return;
    }
    try {
      const std::string completion = answer(body["prompt"].get<std::string>());
      res.set_content(json{{"request_id", body["request_id"]},
                           {"completion", completion}}
                          .dump(),
                      "application/json");
    } catch (const Error& e) {
      fail(400, e.what());
    }
  }
};

MockTeacherServer::MockTeacherServer(Corpus corpus, std::uint64_t seed)
    : impl_(std::make_unique<Impl>()) {
  impl_->corpus = std::move(corpus);
  impl_->seed = seed;
  for (const Problem& p : impl_->corpus.problems) {
    const std::string key = question_key(p.question);
    auto [it, inserted] = impl_->by_question.emplace(key, &p);
    if (!inserted) {
      throw CorpusError("mock teacher needs unique question lines; '" + key +
                        "' appears in problems '" + it->second->id +
                        "' and '" + p.id + "'");
    }
  }
  auto handler = [impl = impl_.get()](const httplib::Request& req,
                                      httplib::Response& res) {
    impl->handle(req, res);
  };
  impl_->server.Post("/complete", handler);
  impl_->server.Post("/", handler);
}

MockTeacherServer::~MockTeacherServer() { stop(); }

int MockTeacherServer::start(int port) {
  if (impl_->thread.joinable()) {
    throw Error("mock teacher is already running on port " +
                std::to_string(impl_->port));
  }
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    if (impl_->port <= 0) {
      throw Error("mock teacher could not bind a port");
    }
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port)) {
      throw Error("mock teacher could not bind port " + std::to_string(port));
    }
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void MockTeacherServer::stop() {
  if (impl_ == nullptr) return;
  if (impl_->server.is_running()) {
    impl_->server.stop();
  }
  if (impl_->thread.joinable()) {
    impl_->thread.join();
  }
}

int MockTeacherServer::bound_port() const { return impl_->port; }

std::string MockTeacherServer::endpoint_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + "/complete";
}

void MockTeacherServer::serve_forever(
    int port, const std::function<void(int)>& on_bound) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    if (impl_->port <= 0) {
      throw Error("mock teacher could not bind a port");
    }
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port)) {
      throw Error("mock teacher could not bind port " + std::to_string(port));
    }
    impl_->port = port;
  }
  if (on_bound) on_bound(impl_->port);
  impl_->server.listen_after_bind();
}

}  // namespace ares
