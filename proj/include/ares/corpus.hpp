#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ares {

// One rationale sentence.  `terminal` is derived from the text, never set
// by hand: it is true exactly when the trimmed text ends in '.', '?' or '!'.
// Non-terminal sentences are truncation fragments (e.g. a generation that
// ran out of budget mid-sentence: "The pot is-").
struct Sentence {
  std::string text;   // trimmed, non-empty
  bool terminal = false;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// Builds a Sentence from raw text: trims ASCII whitespace and computes
// `terminal`.  Returns nullopt when nothing is left after trimming.
std::optional<Sentence> make_sentence(std::string_view raw);

// An ordered list of sentences; the unit the policy emits and the teacher
// scores, corrects, and judges.
struct Rationale {
  std::vector<Sentence> sentences;

  bool empty() const { return sentences.empty(); }
  std::size_t size() const { return sentences.size(); }

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

// A multiple-choice problem.  `image_caption` is the textual stand-in that
// prompts use in place of the actual image when `has_image` is true.
// `gold_rationale` is the human reference; problems without one can still be
// trained on via a live teacher but are skipped by the scripted teacher.
struct Problem {
  std::string id;
  std::string question;
  std::vector<std::string> options;
  std::string hint;
  int answer_index = 0;
  bool has_image = false;
  std::string image_caption;
  std::optional<Rationale> gold_rationale;

  const std::string& answer_text() const { return options[answer_index]; }
};

// Splits raw model text into sentences:
//   * backslashes are dropped first (artifacts of escaped generations),
//   * text is cut after each '.', '?' or '!' (terminator kept),
//   * a literal 'n' immediately following a terminator is skipped -- the
//     leftover of a mangled "\n" whose backslash was removed above,
//   * a non-empty tail without a terminator becomes one non-terminal
//     fragment sentence,
//   * pieces that trim to nothing are dropped.
// "A.nB!" therefore yields ["A.", "B!"].
std::vector<Sentence> segment_rationale(std::string_view text);

// Removes repeated sentences, keeping the first occurrence of each exact
// text.  Order of the survivors is preserved.
std::vector<Sentence> dedup_sentences(const std::vector<Sentence>& sentences);

// Joins sentence texts with single spaces; the inverse direction of
// segment_rationale for display and prompt embedding.
std::string serialize_rationale(const Rationale& r);

struct Corpus {
  std::vector<Problem> problems;
  std::string digest;  // content digest (hex), recorded in run manifests
};

// Stable content digest over the canonical JSON form of each problem.
std::string corpus_digest(const std::vector<Problem>& problems);

// Loads a JSONL corpus (one problem object per line; blank lines ignored).
// Throws CorpusError naming the line number and problem id on: malformed
// JSON, missing/mistyped fields, answer_index out of range, duplicate ids,
// empty or non-terminal gold sentences.
Corpus load_corpus(const std::filesystem::path& path);

// Writes problems in the same JSONL form load_corpus reads.
void save_corpus(const std::vector<Problem>& problems,
                 const std::filesystem::path& path);

// Canonical single-line JSON for one problem (used by save_corpus and the
// corpus digest).
std::string problem_to_json_line(const Problem& p);

}  // namespace ares
