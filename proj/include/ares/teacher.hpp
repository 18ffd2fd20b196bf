#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ares/corpus.hpp"

namespace ares {

// Per-sentence teacher scores, aligned index-for-index with the sentences
// that were sent for scoring.  Values lie in [0, 1] on a 0.1 grid.
struct ScoreResponse {
  std::vector<double> scores;
};

enum class JudgeChoice { kA, kB };

// True when v is one of 0.0, 0.1, ..., 1.0 (within a small numeric slack
// for values that arrived through decimal text).
bool is_on_score_grid(double v);

// ---------------------------------------------------------------------------
// Prompt builders
// ---------------------------------------------------------------------------
// The instruction text is fixed verbatim; only the problem fields and the
// rationale sentences are substituted.  When the problem has an image, the
// preamble switches to its image-mentioning variant and an "Image:" line
// carrying the caption (the textual stand-in for the picture) is added
// above the question.

std::string build_score_prompt(const Problem& p,
                               const std::vector<Sentence>& sentences);
std::string build_correction_prompt(const Problem& p, const Rationale& cleaned);
std::string build_judge_prompt(const Problem& p, const Rationale& option_a,
                               const Rationale& option_b);

// ---------------------------------------------------------------------------
// Response parsers
// ---------------------------------------------------------------------------

// Extracts the first JSON object from raw (which may be wrapped in prose or
// markdown fences) and reads one score per expected sentence.  Keys are
// matched positionally: the i-th key must equal the i-th sentence text after
// trimming.  Positional matching is what keeps responses for rationales with
// repeated sentences unambiguous -- a key lookup could not distinguish the
// two occurrences.  Throws ParseError naming the offending sentence on
// mismatch, off-grid or out-of-range values, and missing or extra entries.
ScoreResponse parse_score_response(std::string_view raw,
                                   const std::vector<Sentence>& expected);

// Extracts the text between the braces following "final_rationale" and
// segments it.  Throws ParseError when the block is missing, unbalanced,
// or empty.  Sentence completeness is the dataset builder's concern, not
// the parser's: a teacher may legitimately return a trailing fragment and
// the builder decides to skip that record.
Rationale parse_correction_response(std::string_view raw);

// Accepts exactly "A" or "B" after trimming surrounding whitespace.
// Anything else throws ParseError; the eval harness records the error and
// excludes the pair.
JudgeChoice parse_judge_response(std::string_view raw);

// ---------------------------------------------------------------------------
// Canned-response renderers and prompt readers
// ---------------------------------------------------------------------------
// The renderers produce exactly the reply a cooperative teacher sends; the
// parsers above invert them (asserted by round-trip tests).  The readers
// invert the prompt builders for the fields the reference mock server needs
// to answer like the in-process scripted teacher; they throw ParseError on
// prompts the builders could not have produced.

std::string render_score_response(const std::vector<Sentence>& sentences,
                                  const ScoreResponse& scores);
std::string render_correction_response(const Rationale& corrected);

std::string read_prompt_question(std::string_view prompt);
std::vector<Sentence> read_score_prompt_sentences(std::string_view prompt);
// May be empty: an all-STOP policy sends "original_rationale:{}" and the
// teacher is expected to supply the rationale from scratch.
Rationale read_correction_prompt_rationale(std::string_view prompt);
std::pair<Rationale, Rationale> read_judge_prompt_options(
    std::string_view prompt);

// ---------------------------------------------------------------------------
// Scripted (gold-backed) teacher functions
// ---------------------------------------------------------------------------

// Lowercased maximal alphanumeric runs.
std::vector<std::string> tokenize_for_similarity(std::string_view text);

// Set Jaccard over tokenize_for_similarity tokens; 0.0 when the union is
// empty.
double token_jaccard(std::string_view a, std::string_view b);

// Deterministic stand-ins for a live teacher, derived from the gold
// rationale.
//
// scripted_score, per candidate sentence in order:
//   * exact repeat of an earlier candidate sentence -> 0.0,
//   * non-terminal fragment -> 0.2,
//   * otherwise the best token-Jaccard against gold sentences not yet
//     matched, rounded to the 0.1 grid; a positive-similarity match
//     consumes its gold sentence (ties to the lowest gold index) so one
//     gold cannot justify two candidate sentences.
ScoreResponse scripted_score(const Rationale& gold, const Rationale& candidate);

// scripted_correct: keeps candidate sentences whose best unconsumed-gold
// similarity is >= 0.8 (consuming that gold, preserving the candidate's
// original text), drops the rest, then appends every unconsumed gold
// sentence in gold order.  The result is deduplicated, non-empty, and
// fully terminal.
Rationale scripted_correct(const Rationale& gold, const Rationale& candidate);

// scripted_judge: the side whose mean scripted score against the problem's
// gold is higher wins.  Exact ties fall to a coin flip derived from
// (seed, problem id), anchored to the rationale contents rather than the
// slots, so verdicts are stable for a given seed, unbiased across problems,
// and invariant under swapping the options.  Throws TeacherError when the
// problem has no gold rationale (the pair is unjudgeable).
JudgeChoice scripted_judge(const Problem& p, const Rationale& option_a,
                           const Rationale& option_b, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Teacher interface
// ---------------------------------------------------------------------------

struct ScoreRequest {
  const Problem* problem;                   // non-owning
  const std::vector<Sentence>* sentences;   // non-owning
};
struct CorrectionRequest {
  const Problem* problem;
  const Rationale* cleaned;
};
struct JudgeRequest {
  const Problem* problem;
  const Rationale* option_a;
  const Rationale* option_b;
};

// Batched results carry per-item failure instead of throwing so one bad
// problem cannot abort a whole collection pass; callers decide whether to
// skip or abort.
struct ScoreOutcome {
  bool ok = false;
  ScoreResponse response;
  std::string error;
};
struct CorrectionOutcome {
  bool ok = false;
  Rationale corrected;
  std::string error;
};
struct JudgeOutcome {
  bool ok = false;
  JudgeChoice verdict = JudgeChoice::kA;
  std::string error;
};

class Teacher {
 public:
  virtual ~Teacher() = default;

  virtual ScoreResponse score(const Problem& p,
                              const std::vector<Sentence>& sentences) = 0;
  virtual Rationale correct(const Problem& p, const Rationale& cleaned) = 0;
  virtual JudgeChoice judge(const Problem& p, const Rationale& option_a,
                            const Rationale& option_b) = 0;

  // Batched variants.  The defaults loop sequentially and convert thrown
  // Errors into per-item failures; transports that can parallelize (the
  // HTTP teacher) override them.  Results are aligned with the requests.
  virtual std::vector<ScoreOutcome> score_many(
      const std::vector<ScoreRequest>& requests);
  virtual std::vector<CorrectionOutcome> correct_many(
      const std::vector<CorrectionRequest>& requests);
  virtual std::vector<JudgeOutcome> judge_many(
      const std::vector<JudgeRequest>& requests);
};

// Teacher backed by gold rationales; fully deterministic given the seed.
class ScriptedTeacher : public Teacher {
 public:
  explicit ScriptedTeacher(std::uint64_t seed) : seed_(seed) {}

  ScoreResponse score(const Problem& p,
                      const std::vector<Sentence>& sentences) override;
  Rationale correct(const Problem& p, const Rationale& cleaned) override;
  JudgeChoice judge(const Problem& p, const Rationale& option_a,
                    const Rationale& option_b) override;

 private:
  std::uint64_t seed_;
};

}  // namespace ares
