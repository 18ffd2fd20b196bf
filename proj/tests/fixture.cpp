#include "fixture.hpp"

#include <atomic>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ares/corpus.hpp"
#include "ares/errors.hpp"
#include "ares/policy.hpp"
#include "ares/util.hpp"

namespace testfix {
namespace {

// Two distinctive words per template, disjoint from the shared core below
// and from each other.
const char* kUniqueWords[40] = {
    "alpha", "beta",  "gamma", "delta", "epsilon", "zeta",  "eta",   "theta",
    "iota",  "kappa", "lambda", "mu",   "nu",      "xi",    "omicron", "pi",
    "rho",   "sigma", "tau",   "upsilon", "phi",   "chi",   "psi",   "omega",
    "one",   "two",   "three", "four",  "five",    "six",   "seven", "eight",
    "nine",  "ten",   "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen"};

}  // namespace

std::vector<std::string> content_templates() {
  // Core tokens shared by every template: we, track, the, running, total,
  // here (6 of them).  Each template adds its two unique words, so the
  // token set has size 8 and any two templates intersect in exactly the
  // core: Jaccard = 6 / 10.
  std::vector<std::string> out;
  out.reserve(20);
  for (int i = 0; i < 20; ++i) {
    out.push_back(std::string("We track the running total here: ") +
                  kUniqueWords[2 * i] + " " + kUniqueWords[2 * i + 1] + ".");
  }
  return out;
}

ares::SentenceVocab vocab() {
  return ares::SentenceVocab::from_content_templates(content_templates());
}

int gold_length(int i) { return 4 + (i % 2); }

// Stride 3 over 20 templates: distinct for up to 5 picks.
int gold_content_index(int i, int k) { return (i * 7 + k * 3) % 20; }

// (i*7 + 1) % 20 collides with a gold pick only when 3k = 1 (mod 20),
// i.e. k = 7, beyond any gold length.
int junk_content_index(int i) { return (i * 7 + 1) % 20; }

bool stop_biased(int i) { return i % 5 == 0; }

std::vector<ares::Problem> problems(int n) {
  const std::vector<std::string> templates = content_templates();
  std::vector<ares::Problem> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    ares::Problem p;
    p.id = "fx-" + std::to_string(i);
    p.question = "Problem " + std::to_string(i) +
                 ": what is the running total at the end?";
    p.options = {std::to_string(10 + i), std::to_string(20 + i),
                 std::to_string(30 + i), std::to_string(40 + i)};
    p.answer_index = i % 4;
    if (i % 10 == 3) {
      p.has_image = true;
      p.image_caption = "a plot of the running total over time";
    }
    if (i % 10 == 7) {
      p.hint = "Add the contributions one step at a time.";
    }
    ares::Rationale gold;
    for (int k = 0; k < gold_length(i); ++k) {
      gold.sentences.push_back(
          *ares::make_sentence(templates[gold_content_index(i, k)]));
    }
    p.gold_rationale = std::move(gold);
    out.push_back(std::move(p));
  }
  return out;
}

ares::Corpus corpus(int n) {
  ares::Corpus c;
  c.problems = problems(n);
  c.digest = ares::corpus_digest(c.problems);
  return c;
}

ares::Policy crafted_initial_policy(
    const ares::SentenceVocab& vocab, const std::vector<ares::Problem>& problems) {
  ares::Policy policy = ares::make_uniform_policy(vocab);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    ares::PolicyState s0{problems[i].id, 0, ares::kStartAction};
    std::vector<double> logits(static_cast<std::size_t>(vocab.size()), 0.0);
    if (stop_biased(static_cast<int>(i))) {
      logits[ares::kStopAction] = 2.0;
    } else {
      // +1 because action 0 is STOP; content template j is action j+1.
      logits[junk_content_index(static_cast<int>(i)) + 1] = 1.0;
    }
    policy.params.logits[s0] = std::move(logits);
  }
  return policy;
}

ares::Policy junk_biased_policy(
    const ares::SentenceVocab& vocab, const std::vector<ares::Problem>& problems) {
  ares::Policy policy = ares::make_uniform_policy(vocab);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    ares::PolicyState s0{problems[i].id, 0, ares::kStartAction};
    std::vector<double> logits(static_cast<std::size_t>(vocab.size()), 0.0);
    logits[junk_content_index(static_cast<int>(i)) + 1] = 1.0;
    policy.params.logits[s0] = std::move(logits);
  }
  return policy;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<std::uint64_t> counter{0};
  std::random_device rd;
  const std::uint64_t nonce =
      ares::mix_seed(rd(), counter.fetch_add(1, std::memory_order_relaxed));
  path_ = std::filesystem::temp_directory_path() /
          ("ares-test-" + tag + "-" + ares::to_hex(nonce));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);  // best effort
}

std::filesystem::path write_corpus_file(const ares::Corpus& corpus,
                                        const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / "corpus.jsonl";
  ares::save_corpus(corpus.problems, path);
  return path;
}

}  // namespace testfix
