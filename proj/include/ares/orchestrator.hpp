#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ares/corpus.hpp"
#include "ares/policy.hpp"
#include "ares/rl.hpp"
#include "ares/sft.hpp"
#include "ares/teacher.hpp"

namespace ares {

enum class TeacherMode { kScripted, kHttp };
std::string teacher_mode_name(TeacherMode mode);
TeacherMode teacher_mode_from_name(const std::string& name);

enum class RunStatus { kRunning, kComplete, kAborted };
std::string run_status_name(RunStatus status);
RunStatus run_status_from_name(const std::string& name);

enum class StageKind { kRl, kSft };

// Canonical stage identifier, e.g. "round2_rl"; used for checkpoint and
// report filenames and for RunManifest.aborted_stage.
std::string stage_name(int round, StageKind kind);

// One round's slot in the manifest.  The configs are resolved up front
// (per-stage seeds baked in) so a resumed run replays exactly what the
// uninterrupted run would have done; paths are run-dir-relative and empty
// until their stage completes; a report's presence is what marks a stage
// complete.
struct RoundEntry {
  int round_index = 0;  // 1-based, contiguous
  RLConfig rl_config;
  SFTConfig sft_config;
  std::string rl_checkpoint_path;
  std::string sft_checkpoint_path;
  std::optional<RLStageReport> rl_report;
  std::optional<SFTStageReport> sft_report;
};

struct RunManifest {
  std::string run_id;
  std::string corpus_hash;
  TeacherMode teacher_mode = TeacherMode::kScripted;
  std::uint64_t global_seed = 0;
  RunStatus status = RunStatus::kRunning;
  int rounds_planned = 0;
  std::string initial_checkpoint_path;
  // stage_name of the stage that failed; empty unless status is ABORTED.
  std::string aborted_stage;
  bool early_stop = false;
  double early_stop_threshold = 0.005;
  std::vector<RoundEntry> rounds;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

// Atomic write (temp + rename): a reader, or a resumed run, never sees a
// half-written manifest.
void save_manifest(const RunManifest& manifest,
                   const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

// Invoked after each stage completes and its manifest hits disk.  Tests
// throw from here to simulate a crash between stages: whatever the hook
// throws propagates out without being recorded as an abort, leaving the
// manifest exactly as a killed process would.
using StageHook =
    std::function<void(const RunManifest& manifest, int round, StageKind kind)>;

struct RunOptions {
  int rounds = 1;
  std::uint64_t global_seed = 0;
  TeacherMode teacher_mode = TeacherMode::kScripted;
  // Stop early when a round's RL stage improves the sampled mean raw score
  // by less than the threshold.  Off by default: round count is the
  // contract, early stop the optimization.
  bool early_stop = false;
  double early_stop_threshold = 0.005;
  LogFn log;
  StageHook after_stage;
};

// Alternating pipeline: for each round, an RL stage (collect, score, PPO)
// then a correction+SFT stage, checkpointing and re-writing the manifest
// after every stage.  The run directory gains:
//   manifest.json
//   checkpoints/initial.ckpt, checkpoints/round{R}_{rl|sft}.ckpt
//   reports/round{R}_{rl|sft}.json
//   corrections/round{R}.jsonl
//   logs/run.log
// A stage failure marks the manifest ABORTED (with the failing stage) and
// rethrows.  Refuses a directory that already holds a manifest -- that is
// what resume_run is for.  Fully deterministic for a scripted teacher.
std::pair<Policy, RunManifest> run_ares(const Policy& initial,
                                        const Corpus& corpus, Teacher& teacher,
                                        const RLConfig& rl_cfg,
                                        const SFTConfig& sft_cfg,
                                        const std::filesystem::path& run_dir,
                                        const RunOptions& opts);

struct ResumeOptions {
  LogFn log;
  StageHook after_stage;
};

// Picks up at the first stage with no report, loading the latest completed
// checkpoint, and runs to completion.  A COMPLETE manifest is a no-op that
// returns the final checkpoint.  An ABORTED manifest is retried from the
// failed stage.  Errors on corpus-hash mismatch and missing checkpoint
// files.  Because per-stage configs (seeds included) live in the manifest
// and checkpoints round-trip parameters bitwise, a resumed run's final
// checkpoint is identical to the uninterrupted run's.
std::pair<Policy, RunManifest> resume_run(
    const std::filesystem::path& manifest_path, const Corpus& corpus,
    Teacher& teacher, const ResumeOptions& opts = {});

}  // namespace ares
