#include "ares/orchestrator.hpp"

#include <signal.h>
#include <unistd.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "ares/config.hpp"
#include "ares/errors.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string teacher_mode_name(TeacherMode mode) {
  return mode == TeacherMode::kHttp ? "http" : "scripted";
}

TeacherMode teacher_mode_from_name(const std::string& name) {
  if (name == "http") return TeacherMode::kHttp;
  if (name == "scripted") return TeacherMode::kScripted;
  throw ConfigError("unknown teacher mode '" + name +
                    "' (expected \"scripted\" or \"http\")");
}

std::string run_status_name(RunStatus status) {
  switch (status) {
    case RunStatus::kRunning:
      return "running";
    case RunStatus::kComplete:
      return "complete";
    case RunStatus::kAborted:
      return "aborted";
  }
  throw Error("unreachable run status");
}

RunStatus run_status_from_name(const std::string& name) {
  if (name == "running") return RunStatus::kRunning;
  if (name == "complete") return RunStatus::kComplete;
  if (name == "aborted") return RunStatus::kAborted;
  throw Error("unknown run status '" + name + "'");
}

std::string stage_name(int round, StageKind kind) {
  return "round" + std::to_string(round) +
         (kind == StageKind::kRl ? "_rl" : "_sft");
}

// ---------------------------------------------------------------------------
// Manifest serialization
// ---------------------------------------------------------------------------

std::string manifest_to_json(const RunManifest& manifest) {
  json j;
  j["run_id"] = manifest.run_id;
  j["corpus_hash"] = manifest.corpus_hash;
  j["teacher_mode"] = teacher_mode_name(manifest.teacher_mode);
  j["global_seed"] = manifest.global_seed;
  j["status"] = run_status_name(manifest.status);
  j["rounds_planned"] = manifest.rounds_planned;
  j["initial_checkpoint_path"] = manifest.initial_checkpoint_path;
  j["aborted_stage"] = manifest.aborted_stage;
  j["early_stop"] = manifest.early_stop;
  j["early_stop_threshold"] = manifest.early_stop_threshold;
  json rounds = json::array();
  for (const RoundEntry& entry : manifest.rounds) {
    json r;
    r["round_index"] = entry.round_index;
    r["rl_config"] = rl_config_to_json(entry.rl_config);
    r["sft_config"] = sft_config_to_json(entry.sft_config);
    r["rl_checkpoint_path"] = entry.rl_checkpoint_path;
    r["sft_checkpoint_path"] = entry.sft_checkpoint_path;
    r["rl_report"] = entry.rl_report.has_value()
                         ? json::parse(rl_report_to_json(*entry.rl_report))
                         : json();
    r["sft_report"] = entry.sft_report.has_value()
                          ? json::parse(sft_report_to_json(*entry.sft_report))
                          : json();
    rounds.push_back(std::move(r));
  }
  j["rounds"] = std::move(rounds);
  return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid manifest JSON: ") + e.what());
  }
  RunManifest manifest;
  try {
    manifest.run_id = j.at("run_id").get<std::string>();
    manifest.corpus_hash = j.at("corpus_hash").get<std::string>();
    manifest.teacher_mode =
        teacher_mode_from_name(j.at("teacher_mode").get<std::string>());
    manifest.global_seed = j.at("global_seed").get<std::uint64_t>();
    manifest.status = run_status_from_name(j.at("status").get<std::string>());
    manifest.rounds_planned = j.at("rounds_planned").get<int>();
    manifest.initial_checkpoint_path =
        j.at("initial_checkpoint_path").get<std::string>();
    manifest.aborted_stage = j.at("aborted_stage").get<std::string>();
    manifest.early_stop = j.at("early_stop").get<bool>();
    manifest.early_stop_threshold = j.at("early_stop_threshold").get<double>();
    for (const json& r : j.at("rounds")) {
      RoundEntry entry;
      entry.round_index = r.at("round_index").get<int>();
      entry.rl_config = rl_config_from_json(r.at("rl_config"));
      entry.sft_config = sft_config_from_json(r.at("sft_config"));
      entry.rl_checkpoint_path = r.at("rl_checkpoint_path").get<std::string>();
      entry.sft_checkpoint_path =
          r.at("sft_checkpoint_path").get<std::string>();
      if (!r.at("rl_report").is_null()) {
        entry.rl_report = rl_report_from_json(r.at("rl_report").dump());
      }
      if (!r.at("sft_report").is_null()) {
        entry.sft_report = sft_report_from_json(r.at("sft_report").dump());
      }
      manifest.rounds.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest JSON: ") + e.what());
  }
  for (std::size_t i = 0; i < manifest.rounds.size(); ++i) {
    if (manifest.rounds[i].round_index != static_cast<int>(i) + 1) {
      throw Error("manifest rounds are not contiguous from 1 (entry " +
                  std::to_string(i) + " has round_index " +
                  std::to_string(manifest.rounds[i].round_index) + ")");
    }
  }
  if (manifest.status == RunStatus::kComplete) {
    for (const RoundEntry& entry : manifest.rounds) {
      if (!entry.rl_report.has_value() || !entry.sft_report.has_value() ||
          entry.rl_checkpoint_path.empty() ||
          entry.sft_checkpoint_path.empty()) {
        throw Error("manifest is COMPLETE but round " +
                    std::to_string(entry.round_index) +
                    " is missing a checkpoint or report");
      }
    }
  }
  if (manifest.status == RunStatus::kAborted && manifest.aborted_stage.empty()) {
    throw Error("manifest is ABORTED but names no aborted stage");
  }
  return manifest;
}

void save_manifest(const RunManifest& manifest, const fs::path& path) {
  atomic_write_file(path, manifest_to_json(manifest) + "\n");
}

RunManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_file(path));
}

// ---------------------------------------------------------------------------
// Run execution
// ---------------------------------------------------------------------------

namespace {

// Exclusive ownership of a run directory for the duration of a run, via a
// pid lock file.  A lock whose process is gone is stale and reclaimed; our
// own pid re-acquires (run + resume in one process).
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir) : path_(run_dir / "lock") {
    const long self = static_cast<long>(::getpid());
    if (fs::exists(path_)) {
      long holder = 0;
      try {
        holder = std::stol(std::string(trim(read_file(path_))));
      } catch (...) {
        holder = 0;  // unreadable lock: treat as stale
      }
      if (holder > 0 && holder != self &&
          ::kill(static_cast<pid_t>(holder), 0) == 0) {
        throw Error("run directory is locked by running pid " +
                    std::to_string(holder) + ": " + path_.string());
      }
    }
    atomic_write_file(path_, std::to_string(self) + "\n");
    owned_ = true;
  }

  ~RunLock() {
    if (owned_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }

  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  bool owned_ = false;
};

// Tees stage logging into logs/run.log and the caller's sink.
class RunLogger {
 public:
  RunLogger(const fs::path& run_dir, LogFn sink) : sink_(std::move(sink)) {
    file_.open(run_dir / "logs" / "run.log", std::ios::app);
  }

  LogFn fn() {
    return [this](const std::string& line) {
      if (file_.is_open()) {
        file_ << line << '\n';
        file_.flush();
      }
      if (sink_) sink_(line);
    };
  }

 private:
  std::ofstream file_;
  LogFn sink_;
};

struct StagePointer {
  std::size_t round_idx = 0;  // index into manifest.rounds
  StageKind kind = StageKind::kRl;
};

fs::path resolved(const fs::path& run_dir, const std::string& rel) {
  return run_dir / rel;
}

Policy load_stage_input(const RunManifest& manifest, const fs::path& run_dir,
                        const StagePointer& at) {
  std::string rel;
  if (at.kind == StageKind::kRl) {
    rel = at.round_idx == 0
              ? manifest.initial_checkpoint_path
              : manifest.rounds[at.round_idx - 1].sft_checkpoint_path;
  } else {
    rel = manifest.rounds[at.round_idx].rl_checkpoint_path;
  }
  fs::path path = resolved(run_dir, rel);
  if (rel.empty() || !fs::exists(path)) {
    throw Error("checkpoint required to resume is missing: '" + rel + "'");
  }
  return load_checkpoint(path);
}

// Runs every stage from the first incomplete one onward, updating and
// saving the manifest after each.  Stage errors mark the manifest ABORTED
// and rethrow; hook exceptions pass through untouched (simulated crash).
Policy execute_from(RunManifest& manifest, const fs::path& run_dir,
                    const Corpus& corpus, Teacher& teacher, const LogFn& log,
                    const StageHook& hook) {
  const fs::path manifest_path = run_dir / "manifest.json";

  // Locate the first stage with no report.
  bool found = false;
  StagePointer at;
  for (std::size_t i = 0; i < manifest.rounds.size() && !found; ++i) {
    if (!manifest.rounds[i].rl_report.has_value()) {
      at = {i, StageKind::kRl};
      found = true;
    } else if (!manifest.rounds[i].sft_report.has_value()) {
      at = {i, StageKind::kSft};
      found = true;
    }
  }

  if (!found) {
    // Nothing left to run; make sure the status says so and hand back the
    // final checkpoint.
    if (manifest.status != RunStatus::kComplete) {
      manifest.status = RunStatus::kComplete;
      manifest.aborted_stage.clear();
      save_manifest(manifest, manifest_path);
    }
    std::string rel = manifest.rounds.empty()
                          ? manifest.initial_checkpoint_path
                          : manifest.rounds.back().sft_checkpoint_path;
    return load_checkpoint(resolved(run_dir, rel));
  }

  if (manifest.status != RunStatus::kRunning) {
    if (log) {
      log("resuming " + run_status_name(manifest.status) + " run at stage " +
          stage_name(manifest.rounds[at.round_idx].round_index, at.kind));
    }
    manifest.status = RunStatus::kRunning;
    manifest.aborted_stage.clear();
    save_manifest(manifest, manifest_path);
  }

  Policy policy = load_stage_input(manifest, run_dir, at);

  for (std::size_t i = at.round_idx; i < manifest.rounds.size(); ++i) {
    RoundEntry& entry = manifest.rounds[i];
    const int round = entry.round_index;

    if (!entry.rl_report.has_value()) {
      const std::string name = stage_name(round, StageKind::kRl);
      if (log) log("stage " + name + " starting");
      try {
        auto [next, report] = ppo_update(policy, corpus.problems, teacher,
                                         entry.rl_config, round, log);
        policy = std::move(next);
        entry.rl_checkpoint_path = "checkpoints/" + name + ".ckpt";
        save_checkpoint(policy, resolved(run_dir, entry.rl_checkpoint_path));
        atomic_write_file(run_dir / "reports" / (name + ".json"),
                          rl_report_to_json(report) + "\n");
        entry.rl_report = std::move(report);
      } catch (const Error& e) {
        manifest.status = RunStatus::kAborted;
        manifest.aborted_stage = name;
        save_manifest(manifest, manifest_path);
        if (log) log("stage " + name + " aborted: " + e.what());
        throw;
      }
      save_manifest(manifest, manifest_path);
      if (log) log("stage " + name + " complete");
      if (hook) hook(manifest, round, StageKind::kRl);
    }

    if (!entry.sft_report.has_value()) {
      const std::string name = stage_name(round, StageKind::kSft);
      if (log) log("stage " + name + " starting");
      try {
        CorrectionDataset dataset = build_correction_dataset(
            policy, corpus.problems, teacher, entry.sft_config, round, log);
        save_correction_dataset(
            dataset,
            run_dir / "corrections" / ("round" + std::to_string(round) + ".jsonl"));
        auto [next, report] =
            sft_update(policy, dataset, entry.sft_config, round, log);
        policy = std::move(next);
        entry.sft_checkpoint_path = "checkpoints/" + name + ".ckpt";
        save_checkpoint(policy, resolved(run_dir, entry.sft_checkpoint_path));
        atomic_write_file(run_dir / "reports" / (name + ".json"),
                          sft_report_to_json(report) + "\n");
        entry.sft_report = std::move(report);
      } catch (const Error& e) {
        manifest.status = RunStatus::kAborted;
        manifest.aborted_stage = name;
        save_manifest(manifest, manifest_path);
        if (log) log("stage " + name + " aborted: " + e.what());
        throw;
      }
      save_manifest(manifest, manifest_path);
      if (log) log("stage " + name + " complete");
      if (hook) hook(manifest, round, StageKind::kSft);
    }

    if (manifest.early_stop && i + 1 < manifest.rounds.size()) {
      const double gain = entry.rl_report->mean_raw_score_after -
                          entry.rl_report->mean_raw_score_before;
      if (gain < manifest.early_stop_threshold) {
        if (log) {
          log("early stop after round " + std::to_string(round) +
              " (rl gain " + std::to_string(gain) + " < threshold " +
              std::to_string(manifest.early_stop_threshold) + ")");
        }
        manifest.rounds.erase(manifest.rounds.begin() +
                                  static_cast<std::ptrdiff_t>(i) + 1,
                              manifest.rounds.end());
        break;
      }
    }
  }

  manifest.status = RunStatus::kComplete;
  manifest.aborted_stage.clear();
  save_manifest(manifest, manifest_path);
  if (log) log("run " + manifest.run_id + " complete");
  return policy;
}

}  // namespace

std::pair<Policy, RunManifest> run_ares(const Policy& initial,
                                        const Corpus& corpus, Teacher& teacher,
                                        const RLConfig& rl_cfg,
                                        const SFTConfig& sft_cfg,
                                        const fs::path& run_dir,
                                        const RunOptions& opts) {
  if (opts.rounds < 1) {
    throw ConfigError("rounds must be >= 1, got " + std::to_string(opts.rounds));
  }
  rl_cfg.validate();
  sft_cfg.validate();

  if (fs::exists(run_dir / "manifest.json")) {
    throw Error("run directory already has a manifest (use resume): " +
                (run_dir / "manifest.json").string());
  }
  fs::create_directories(run_dir / "checkpoints");
  fs::create_directories(run_dir / "reports");
  fs::create_directories(run_dir / "corrections");
  fs::create_directories(run_dir / "logs");

  RunLock lock(run_dir);
  RunLogger logger(run_dir, opts.log);
  LogFn log = logger.fn();

  RunManifest manifest;
  manifest.run_id =
      "ares-" + to_hex(mix_seed(opts.global_seed,
                                fnv1a64(corpus.digest),
                                static_cast<std::uint64_t>(opts.rounds)));
  manifest.corpus_hash = corpus.digest;
  manifest.teacher_mode = opts.teacher_mode;
  manifest.global_seed = opts.global_seed;
  manifest.status = RunStatus::kRunning;
  manifest.rounds_planned = opts.rounds;
  manifest.early_stop = opts.early_stop;
  manifest.early_stop_threshold = opts.early_stop_threshold;

  // Resolve every stage's config now, seeds included: the manifest, not
  // the caller's memory, is what a resumed run replays.
  for (int round = 1; round <= opts.rounds; ++round) {
    RoundEntry entry;
    entry.round_index = round;
    entry.rl_config = rl_cfg;
    entry.rl_config.seed = mix_seed(opts.global_seed,
                                    static_cast<std::uint64_t>(round), 1);
    entry.sft_config = sft_cfg;
    entry.sft_config.seed = mix_seed(opts.global_seed,
                                     static_cast<std::uint64_t>(round), 2);
    manifest.rounds.push_back(std::move(entry));
  }

  manifest.initial_checkpoint_path = "checkpoints/initial.ckpt";
  save_checkpoint(initial, run_dir / manifest.initial_checkpoint_path);
  save_manifest(manifest, run_dir / "manifest.json");
  log("run " + manifest.run_id + " starting (" +
      std::to_string(opts.rounds) + " round(s), seed " +
      std::to_string(opts.global_seed) + ")");

  Policy final_policy =
      execute_from(manifest, run_dir, corpus, teacher, log, opts.after_stage);
  return {std::move(final_policy), std::move(manifest)};
}

std::pair<Policy, RunManifest> resume_run(const fs::path& manifest_path,
                                          const Corpus& corpus,
                                          Teacher& teacher,
                                          const ResumeOptions& opts) {
  if (!fs::exists(manifest_path)) {
    throw Error("manifest not found: " + manifest_path.string());
  }
  const fs::path run_dir = manifest_path.parent_path();
  RunManifest manifest = load_manifest(manifest_path);
  if (manifest.corpus_hash != corpus.digest) {
    throw Error("corpus hash mismatch: manifest has " + manifest.corpus_hash +
                ", loaded corpus has " + corpus.digest);
  }

  RunLock lock(run_dir);
  RunLogger logger(run_dir, opts.log);
  LogFn log = logger.fn();

  Policy final_policy =
      execute_from(manifest, run_dir, corpus, teacher, log, opts.after_stage);
  return {std::move(final_policy), std::move(manifest)};
}

}  // namespace ares
