#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ares/corpus.hpp"

namespace ares {

// Distinguished action index 0: emit nothing further.  The symbol text
// itself never appears inside rationales; it only names the action.
inline constexpr int kStopAction = 0;
inline constexpr std::string_view kStopSymbol = "<STOP>";

// `last_action` value for the first step, before anything was emitted.
inline constexpr int kStartAction = -1;

// The ordered sentence-template inventory.  Index 0 is always the STOP
// symbol; every other template is a unique terminal sentence.
class SentenceVocab {
 public:
  // Empty placeholder (no templates, not even STOP); only useful as a slot
  // to assign a factory-built vocabulary into.
  SentenceVocab() = default;

  // Builds a vocabulary from content templates (STOP is prepended).
  // Throws VocabError on duplicates, empty templates, or a non-terminal
  // template.
  static SentenceVocab from_content_templates(
      const std::vector<std::string>& content);

  // Rebuilds from a full template list whose first entry must be the STOP
  // symbol (the form stored in checkpoints).
  static SentenceVocab from_templates(std::vector<std::string> templates);

  const std::vector<std::string>& templates() const { return templates_; }
  int size() const { return static_cast<int>(templates_.size()); }
  const std::string& text_of(int action) const { return templates_[action]; }

  // Vocab index for an exact sentence text; nullopt when absent.
  std::optional<int> index_of(std::string_view text) const;

  // Stable digest over the ordered templates; params and checkpoints carry
  // it so a policy can never be evaluated against the wrong vocabulary.
  std::uint64_t hash() const { return hash_; }

  // True when `prefix` equals the first prefix.size() templates of *this --
  // the compatibility relation produced by vocabulary extension.
  bool extends(const SentenceVocab& prefix) const;

  // Appends a new terminal template (must not already exist) and rehashes.
  void append_template(const std::string& text);

 private:
  void rebuild_index();

  std::vector<std::string> templates_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t hash_ = 0;
};

// The conditioning context for one sentence choice: which problem, how many
// sentences have been emitted, and what the previous sentence was.
struct PolicyState {
  std::string problem_id;
  int step = 0;
  int last_action = kStartAction;

  friend bool operator==(const PolicyState&, const PolicyState&) = default;
};

struct PolicyStateHash {
  std::size_t operator()(const PolicyState& s) const;
};

// Tabular policy parameters: one logit vector per visited state.  States
// never visited behave as all-zero logits, i.e. a uniform policy, so the
// table only materializes where training actually touched.
struct PolicyParams {
  std::unordered_map<PolicyState, std::vector<double>, PolicyStateHash> logits;
  int version = 1;
  std::uint64_t vocab_hash = 0;
  int vocab_size = 0;
};

// A policy ready to act: parameters plus the vocabulary they index.
struct Policy {
  PolicyParams params;
  SentenceVocab vocab;
};

// Fresh uniform policy over the given vocabulary.
Policy make_uniform_policy(const SentenceVocab& vocab);

// softmax over the state's logits.  Throws VocabError when params and vocab
// hashes disagree.
std::vector<double> action_distribution(const PolicyParams& params,
                                        const SentenceVocab& vocab,
                                        const PolicyState& state);

// Log-softmax over the state's logits (same vocab check).
std::vector<double> action_log_distribution(const PolicyParams& params,
                                            const SentenceVocab& vocab,
                                            const PolicyState& state);

struct SampleResult {
  Rationale rationale;             // content sentences only (STOP excluded)
  std::vector<int> actions;        // includes the STOP action when taken
  std::vector<double> log_probs;   // log pi of each action, full distribution
};

// Autoregressive rollout.  At each step the distribution is restricted to
// the top_k most probable actions (ties to the lower index), renormalized,
// and sampled; rollout ends on STOP or after max_sentences content
// sentences.  top_k larger than the vocabulary is clamped.  top_k == 1 is
// the greedy rollout and consumes no randomness.  Log-probs are taken from
// the unrestricted distribution.
SampleResult sample_rationale(const PolicyParams& params,
                              const SentenceVocab& vocab, const Problem& p,
                              int top_k, int max_sentences,
                              std::mt19937_64& rng);

// Greedy rollout (top_k = 1) convenience.
Rationale greedy_rationale(const PolicyParams& params,
                           const SentenceVocab& vocab, const Problem& p,
                           int max_sentences);

// Maps the rationale's sentences to vocab indices and returns per-step
// log pi, including the terminal STOP step (result size = r.size() + 1).
// Throws VocabError naming the first out-of-vocabulary sentence.
std::vector<double> log_prob_of(const PolicyParams& params,
                                const SentenceVocab& vocab, const Problem& p,
                                const Rationale& r);

// d log pi(action | state) / d logits[state] = onehot(action) - softmax.
// Dense over the state's own vector, zero everywhere else.
std::vector<double> grad_log_prob(const PolicyParams& params,
                                  const PolicyState& state, int action);

// A gradient with respect to the logit table: one vector per touched state.
using GradMap =
    std::unordered_map<PolicyState, std::vector<double>, PolicyStateHash>;

// Gradient-descent step: logits[state] -= learning_rate * scale * g.
// A zero step leaves params bitwise unchanged (no empty entries are
// materialized).
void apply_gradient(PolicyParams& params, const GradMap& grad,
                    double learning_rate, double scale);

// Stable digest over version, vocab hash, and all logit entries in
// canonical order; recorded in correction datasets and manifests.
std::string params_digest(const PolicyParams& params);

// Binary checkpoint I/O.  The file embeds the vocabulary templates, so a
// checkpoint is self-contained; a trailing CRC32 rejects corruption.
void save_checkpoint(const Policy& policy, const std::filesystem::path& path);
Policy load_checkpoint(const std::filesystem::path& path);

// load + vocab-hash guard against an expected vocabulary.
Policy load_checkpoint(const std::filesystem::path& path,
                       const SentenceVocab& expected_vocab);

}  // namespace ares
