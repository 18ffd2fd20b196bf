#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ares/orchestrator.hpp"
#include "ares/policy.hpp"
#include "ares/teacher.hpp"

namespace ares {

// One judged pair, with the random position assignment recorded so the
// swap can be audited and inverted.
struct JudgeVerdict {
  std::string problem_id;
  enum class Winner { kLeft, kRight };
  Winner winner = Winner::kLeft;       // left = OPTION A, right = OPTION B
  bool left_is_candidate_a = false;    // true when the candidate sat in slot A
};

struct ExcludedPair {
  std::string problem_id;
  std::string reason;
};

struct WinRateReport {
  int pairs_total = 0;
  int pairs_judged = 0;
  int wins_candidate = 0;
  double win_rate = 0.0;  // wins_candidate / pairs_judged (0.0 when none)
  std::vector<JudgeVerdict> verdicts;   // one per judged pair, problem order
  std::vector<ExcludedPair> excluded;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  int max_sentences = 8;  // greedy rollout horizon
  LogFn log;
};

// Pairwise comparison over greedy rollouts.  Per problem: roll out both
// policies, assign the candidate to slot A or B by a seeded coin (recorded
// in the verdict), ask the judge, and map the verdict back through the
// recorded swap.  A pair where exactly one rollout is empty is a walkover
// for the non-empty side -- there is nothing to put in the judge prompt's
// other slot, and a policy that says something beats one that stays silent.
// Both-empty, unjudgeable, and unparseable pairs are excluded with reasons
// and reduce the denominator.  Requires the baseline vocabulary to be a
// prefix of (or equal to) the candidate's.  Throws EvalError on an empty
// problem list or incompatible vocabularies.
WinRateReport win_rate(const Policy& candidate, const Policy& baseline,
                       const std::vector<Problem>& problems, Teacher& judge,
                       std::uint64_t seed, const EvalOptions& opts = {});

// Ablation-style labels: RL stage of round 1 is "1st RL"; the SFT stage of
// round R is "Rth ARES"; the RL stage of round R>1 is
// "(R-1)th ARES & Rth RL" -- each checkpoint named by everything applied
// to it so far.
std::string stage_label(int round, StageKind kind);

struct StageRow {
  std::string stage_label;
  double mean_raw_score = 0.0;       // greedy rollouts, teacher-scored
  double win_rate_vs_initial = 0.0;  // this checkpoint vs the initial policy
};

struct StageComparison {
  std::vector<StageRow> rows;  // strict stage order: rl, sft, rl, sft, ...
};

// Walks a COMPLETE manifest's checkpoints in stage order, scoring each and
// judging it against the initial checkpoint.  run_dir anchors the
// manifest's relative paths.  Throws EvalError when the manifest is not
// COMPLETE or a checkpoint file is missing.
StageComparison stage_comparison(const RunManifest& manifest,
                                 const std::filesystem::path& run_dir,
                                 const std::vector<Problem>& problems,
                                 Teacher& teacher, std::uint64_t seed,
                                 const EvalOptions& opts = {});

enum class ReportFormat { kJson, kCsv };

// Report emission.  JSON round-trips losslessly (win_rate_report_from_json
// restores an identical report); the CSV is plot data with the fixed
// header "stage_label,mean_raw_score,win_rate_vs_initial".
std::string win_rate_report_to_json(const WinRateReport& report);
WinRateReport win_rate_report_from_json(const std::string& text);
std::string stage_comparison_to_json(const StageComparison& comparison);
std::string stage_comparison_to_csv(const StageComparison& comparison);

void emit_report(const WinRateReport& report, ReportFormat format,
                 const std::filesystem::path& path);
void emit_report(const StageComparison& comparison, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace ares
