// ares: sentence-level RL from teacher feedback, alternated with
// correction-driven supervised fine-tuning.  One JSON config file drives
// every subcommand; --set dotted.path=value overrides any key in it, and
// --seed / --rounds are shorthands for the matching keys.  Exit codes:
// 0 success, 1 usage or config error, 2 stage failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ares/config.hpp"
#include "ares/corpus.hpp"
#include "ares/errors.hpp"
#include "ares/eval.hpp"
#include "ares/mock_teacher.hpp"
#include "ares/orchestrator.hpp"
#include "ares/policy.hpp"
#include "ares/rl.hpp"
#include "ares/sft.hpp"
#include "ares/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_stdin() {
  return std::string(std::istreambuf_iterator<char>(std::cin),
                     std::istreambuf_iterator<char>());
}

ares::LogFn stderr_log() {
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

// Flags shared by the config-driven subcommands.  --seed and --rounds are
// folded into the override list so every knob flows through one mechanism.
struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int rounds = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* rounds_opt = nullptr;

  void wire(CLI::App* sub, bool with_rounds) {
    sub->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--set", sets,
                    "override a config key: dotted.path=value (repeatable)");
    seed_opt = sub->add_option("--seed", seed, "override the global seed");
    if (with_rounds) {
      rounds_opt = sub->add_option("--rounds", rounds,
                                   "override the number of rounds");
    }
  }

  ares::RunConfig load() const {
    std::vector<std::string> overrides = sets;
    if (seed_opt != nullptr && seed_opt->count() > 0) {
      overrides.push_back("seed=" + std::to_string(seed));
    }
    if (rounds_opt != nullptr && rounds_opt->count() > 0) {
      overrides.push_back("rounds=" + std::to_string(rounds));
    }
    return ares::load_run_config(config_path, overrides);
  }
};

// Stage seeds match what run_ares derives for round 1, so a standalone
// stage reproduces the pipeline's.
ares::RLConfig stage_rl_config(const ares::RunConfig& cfg) {
  ares::RLConfig rl = cfg.rl;
  rl.seed = ares::mix_seed(cfg.seed, 1, 1);
  return rl;
}

ares::SFTConfig stage_sft_config(const ares::RunConfig& cfg) {
  ares::SFTConfig sft = cfg.sft;
  sft.seed = ares::mix_seed(cfg.seed, 1, 2);
  return sft;
}

void write_or_print(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    ares::atomic_write_file(out_path, text);
    std::cerr << "wrote " << out_path << '\n';
  }
}

int cmd_segment() {
  const std::string text = read_stdin();
  json out = json::array();
  for (const ares::Sentence& s : ares::segment_rationale(text)) {
    out.push_back({{"text", s.text}, {"terminal", s.terminal}});
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_score(const CommonArgs& common) {
  const ares::RunConfig cfg = common.load();
  json in;
  try {
    in = json::parse(read_stdin());
  } catch (const json::exception& e) {
    throw ares::ConfigError(
        std::string("stdin must be {\"problem_id\", \"rationale\"}: ") +
        e.what());
  }
  if (!in.is_object() || !in.contains("problem_id") ||
      !in["problem_id"].is_string() || !in.contains("rationale") ||
      !in["rationale"].is_string()) {
    throw ares::ConfigError(
        "stdin must be a JSON object with string problem_id and rationale");
  }
  const std::string problem_id = in["problem_id"].get<std::string>();
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  const auto it = std::find_if(
      corpus.problems.begin(), corpus.problems.end(),
      [&](const ares::Problem& p) { return p.id == problem_id; });
  if (it == corpus.problems.end()) {
    throw ares::CorpusError("no problem with id '" + problem_id + "' in " +
                            cfg.corpus_path);
  }
  std::vector<ares::Sentence> sentences =
      ares::segment_rationale(in["rationale"].get<std::string>());
  if (sentences.empty()) {
    throw ares::ConfigError("rationale segments to zero sentences");
  }
  auto teacher = ares::make_teacher(cfg);
  ares::ScoreResponse scores = teacher->score(*it, sentences);
  std::cout << json{{"problem_id", problem_id}, {"scores", scores.scores}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_rl(const CommonArgs& common, const std::string& out_dir) {
  const ares::RunConfig cfg = common.load();
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  auto teacher = ares::make_teacher(cfg);
  ares::Policy policy = ares::make_initial_policy(cfg);

  fs::create_directories(out_dir);
  auto [trained, report] = ares::ppo_update(
      policy, corpus.problems, *teacher, stage_rl_config(cfg), 1, stderr_log());
  ares::save_checkpoint(trained, fs::path(out_dir) / "checkpoint.ckpt");
  const std::string report_json = ares::rl_report_to_json(report);
  ares::atomic_write_file(fs::path(out_dir) / "report.json",
                          report_json + "\n");
  std::cout << report_json << '\n';
  return 0;
}

int cmd_correct(const CommonArgs& common, const std::string& out_path) {
  const ares::RunConfig cfg = common.load();
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  auto teacher = ares::make_teacher(cfg);
  ares::Policy policy = ares::make_initial_policy(cfg);
  ares::CorrectionDataset dataset = ares::build_correction_dataset(
      policy, corpus.problems, *teacher, stage_sft_config(cfg), 1,
      stderr_log());
  write_or_print(ares::correction_dataset_to_jsonl(dataset), out_path);
  return 0;
}

int cmd_sft(const CommonArgs& common, const std::string& out_dir) {
  const ares::RunConfig cfg = common.load();
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  auto teacher = ares::make_teacher(cfg);
  ares::Policy policy = ares::make_initial_policy(cfg);
  const ares::SFTConfig sft_cfg = stage_sft_config(cfg);

  fs::create_directories(out_dir);
  ares::CorrectionDataset dataset = ares::build_correction_dataset(
      policy, corpus.problems, *teacher, sft_cfg, 1, stderr_log());
  ares::save_correction_dataset(dataset,
                                fs::path(out_dir) / "corrections.jsonl");
  auto [trained, report] =
      ares::sft_update(policy, dataset, sft_cfg, 1, stderr_log());
  ares::save_checkpoint(trained, fs::path(out_dir) / "checkpoint.ckpt");
  const std::string report_json = ares::sft_report_to_json(report);
  ares::atomic_write_file(fs::path(out_dir) / "report.json",
                          report_json + "\n");
  std::cout << report_json << '\n';
  return 0;
}

int cmd_run(const CommonArgs& common, const std::string& out_dir) {
  const ares::RunConfig cfg = common.load();
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  auto teacher = ares::make_teacher(cfg);

  const fs::path run_dir(out_dir);
  const fs::path manifest_path = run_dir / "manifest.json";

  ares::RunManifest manifest;
  if (fs::exists(manifest_path)) {
    std::cerr << "manifest found; resuming\n";
    ares::ResumeOptions opts;
    opts.log = stderr_log();
    manifest = ares::resume_run(manifest_path, corpus, *teacher, opts).second;
  } else {
    ares::Policy initial = ares::make_initial_policy(cfg);
    ares::RunOptions opts;
    opts.rounds = cfg.rounds;
    opts.global_seed = cfg.seed;
    opts.teacher_mode = cfg.teacher_mode;
    opts.early_stop = cfg.early_stop;
    opts.early_stop_threshold = cfg.early_stop_threshold;
    opts.log = stderr_log();
    manifest = ares::run_ares(initial, corpus, *teacher, cfg.rl, cfg.sft,
                              run_dir, opts)
                   .second;
  }
  std::cout << json{{"run_id", manifest.run_id},
                    {"status", ares::run_status_name(manifest.status)},
                    {"rounds", manifest.rounds.size()},
                    {"manifest", manifest_path.string()}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_judge(const CommonArgs& common, const std::string& out_path,
              const std::string& format) {
  const ares::RunConfig cfg = common.load();
  if (cfg.eval_candidate_checkpoint.empty() ||
      cfg.eval_baseline_checkpoint.empty()) {
    throw ares::ConfigError(
        "judge needs eval.candidate_checkpoint and eval.baseline_checkpoint "
        "(settable via --set)");
  }
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  auto teacher = ares::make_teacher(cfg);
  ares::Policy candidate = ares::load_checkpoint(cfg.eval_candidate_checkpoint);
  ares::Policy baseline = ares::load_checkpoint(cfg.eval_baseline_checkpoint);

  ares::EvalOptions opts;
  opts.max_sentences = cfg.eval_max_sentences;
  opts.log = stderr_log();
  ares::WinRateReport report = ares::win_rate(candidate, baseline,
                                              corpus.problems, *teacher,
                                              cfg.seed, opts);
  if (format == "csv") {
    if (out_path.empty()) {
      throw ares::ConfigError("--format csv needs --out FILE");
    }
    ares::emit_report(report, ares::ReportFormat::kCsv, out_path);
    std::cerr << "wrote " << out_path << '\n';
  } else {
    write_or_print(ares::win_rate_report_to_json(report), out_path);
  }
  return 0;
}

int cmd_report(const CommonArgs& common, const std::string& out_path,
               const std::string& format) {
  const ares::RunConfig cfg = common.load();
  if (cfg.eval_run_dir.empty()) {
    throw ares::ConfigError("report needs eval.run_dir (settable via --set)");
  }
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  auto teacher = ares::make_teacher(cfg);
  const fs::path run_dir(cfg.eval_run_dir);
  ares::RunManifest manifest = ares::load_manifest(run_dir / "manifest.json");

  ares::EvalOptions opts;
  opts.max_sentences = cfg.eval_max_sentences;
  opts.log = stderr_log();
  ares::StageComparison comparison = ares::stage_comparison(
      manifest, run_dir, corpus.problems, *teacher, cfg.seed, opts);
  const std::string text = format == "csv"
                               ? ares::stage_comparison_to_csv(comparison)
                               : ares::stage_comparison_to_json(comparison);
  write_or_print(text, out_path);
  return 0;
}

int cmd_mock_teacher(const CommonArgs& common, int port) {
  const ares::RunConfig cfg = common.load();
  ares::Corpus corpus = ares::load_corpus(cfg.corpus_path);
  ares::MockTeacherServer server(std::move(corpus), cfg.seed);
  server.serve_forever(port, [](int bound) {
    std::cout << "listening on http://127.0.0.1:" << bound << "/complete"
              << std::endl;
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ares: alternate sentence-level RL from teacher scores with "
      "correction-driven supervised fine-tuning"};
  app.require_subcommand(1);

  CLI::App* segment = app.add_subcommand(
      "segment", "segment stdin text into sentences (JSON out)");

  CommonArgs score_args;
  CLI::App* score = app.add_subcommand(
      "score",
      "score a rationale; stdin: {\"problem_id\", \"rationale\"}");
  score_args.wire(score, false);

  CommonArgs rl_args;
  std::string rl_out;
  CLI::App* rl = app.add_subcommand("rl", "run one RL stage");
  rl_args.wire(rl, false);
  rl->add_option("--out", rl_out, "output directory")->required();

  CommonArgs correct_args;
  std::string correct_out;
  CLI::App* correct = app.add_subcommand(
      "correct", "build the correction dataset (JSONL)");
  correct_args.wire(correct, false);
  correct->add_option("--out", correct_out,
                      "output file (stdout when omitted)");

  CommonArgs sft_args;
  std::string sft_out;
  CLI::App* sft = app.add_subcommand(
      "sft", "run one correction+SFT stage");
  sft_args.wire(sft, false);
  sft->add_option("--out", sft_out, "output directory")->required();

  CommonArgs run_args;
  std::string run_out;
  CLI::App* run = app.add_subcommand(
      "run", "run the full pipeline (resumes when --out has a manifest)");
  run_args.wire(run, true);
  run->add_option("--out", run_out, "run directory")->required();

  CommonArgs judge_args;
  std::string judge_out, judge_format = "json";
  CLI::App* judge = app.add_subcommand(
      "judge",
      "win rate of eval.candidate_checkpoint vs eval.baseline_checkpoint");
  judge_args.wire(judge, false);
  judge->add_option("--out", judge_out, "output file (stdout when omitted)");
  judge->add_option("--format", judge_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  CommonArgs report_args;
  std::string report_out, report_format = "json";
  CLI::App* report = app.add_subcommand(
      "report", "stage comparison for the run at eval.run_dir");
  report_args.wire(report, false);
  report->add_option("--out", report_out, "output file (stdout when omitted)");
  report->add_option("--format", report_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  CommonArgs mock_args;
  int mock_port = 0;
  CLI::App* mock = app.add_subcommand(
      "mock-teacher", "serve the scripted teacher over the wire protocol");
  mock_args.wire(mock, false);
  mock->add_option("--port", mock_port, "port to bind (0 picks one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (segment->parsed()) return cmd_segment();
    if (score->parsed()) return cmd_score(score_args);
    if (rl->parsed()) return cmd_rl(rl_args, rl_out);
    if (correct->parsed()) return cmd_correct(correct_args, correct_out);
    if (sft->parsed()) return cmd_sft(sft_args, sft_out);
    if (run->parsed()) return cmd_run(run_args, run_out);
    if (judge->parsed()) return cmd_judge(judge_args, judge_out, judge_format);
    if (report->parsed())
      return cmd_report(report_args, report_out, report_format);
    if (mock->parsed()) return cmd_mock_teacher(mock_args, mock_port);
  } catch (const ares::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ares::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
