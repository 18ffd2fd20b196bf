#pragma once

// Shared synthetic world for the closed-loop tests.
//
// The 20 sentence templates are built so the token algebra of the scripted
// teacher is exact: every template carries the same 6-word core plus 2 words
// of its own, so any two distinct templates have token Jaccard 6/10 = 0.6
// and an exact match scores 1.0.  Junk therefore lands on the score grid at
// 0.6 (reward +0.1) and gold hits at 1.0 (reward +0.5), which keeps rollout
// returns positive and gives RL a clean signal without making the task
// trivial.
//
// Gold rationales are 4-5 templates chosen by a stride that never collides
// within one problem.  The crafted initial policy biases every fifth
// problem's first step toward STOP (so there is a known subset that starts
// by emitting nothing) and every other problem toward a non-gold template
// (so its greedy rollout is one mediocre junk sentence).

#include <filesystem>
#include <string>
#include <vector>

#include "ares/corpus.hpp"
#include "ares/policy.hpp"

namespace testfix {

// The 20 content templates (terminal sentences, pairwise Jaccard 0.6).
std::vector<std::string> content_templates();

// STOP + the 20 content templates.
ares::SentenceVocab vocab();

// Index into content_templates() of the k-th gold sentence of problem i.
int gold_content_index(int i, int k);

// Number of gold sentences of problem i (4 or 5).
int gold_length(int i);

// A content-template index guaranteed absent from problem i's gold.
int junk_content_index(int i);

// True when the crafted initial policy greedily emits STOP first on
// problem i (every fifth problem).
bool stop_biased(int i);

std::vector<ares::Problem> problems(int n = 50);
ares::Corpus corpus(int n = 50);

// Uniform policy with a biased first step per problem: STOP logit +2 on the
// stop_biased subset, junk-template logit +1 everywhere else.
ares::Policy crafted_initial_policy(const ares::SentenceVocab& vocab,
                                    const std::vector<ares::Problem>& problems);

// Uniform policy whose first step is biased toward the junk template on
// every problem, so every greedy rollout is the same non-empty sentence.
// Used where identical non-empty rollouts are needed (judge symmetry).
ares::Policy junk_biased_policy(const ares::SentenceVocab& vocab,
                                const std::vector<ares::Problem>& problems);

// Self-cleaning temporary directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const {
    return path_ / leaf;
  }

 private:
  std::filesystem::path path_;
};

// Writes the corpus as JSONL into dir and returns the file path.
std::filesystem::path write_corpus_file(const ares::Corpus& corpus,
                                        const std::filesystem::path& dir);

}  // namespace testfix
