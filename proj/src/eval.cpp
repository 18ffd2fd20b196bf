#include "ares/eval.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;
namespace fs = std::filesystem;

WinRateReport win_rate(const Policy& candidate, const Policy& baseline,
                       const std::vector<Problem>& problems, Teacher& judge,
                       std::uint64_t seed, const EvalOptions& opts) {
  if (problems.empty()) {
    throw EvalError("win_rate: empty problem list");
  }
  if (!candidate.vocab.extends(baseline.vocab)) {
    throw EvalError(
        "win_rate: baseline vocabulary is not a prefix of the candidate's");
  }

  WinRateReport report;
  report.pairs_total = static_cast<int>(problems.size());
  report.seed = seed;

  // Roll out both sides and assign positions first; the seeded coin stream
  // consumes exactly one draw per problem, in problem order, so the
  // assignment is independent of which pairs later fail to judge.
  struct Pending {
    std::size_t problem;
    bool candidate_is_a;
  };
  std::vector<Pending> pending;
  std::vector<Rationale> lefts, rights;
  std::mt19937_64 coin(mix_seed(seed, 0xAB));
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& p = problems[i];
    Rationale cand = greedy_rationale(candidate.params, candidate.vocab, p,
                                      opts.max_sentences);
    Rationale base = greedy_rationale(baseline.params, baseline.vocab, p,
                                      opts.max_sentences);
    const bool candidate_is_a = uniform_double(coin) < 0.5;

    if (cand.empty() && base.empty()) {
      report.excluded.push_back({p.id, "both rationales empty"});
      continue;
    }
    if (cand.empty() || base.empty()) {
      // Walkover: one side has nothing to put in the judge prompt, and a
      // policy that says something beats one that stays silent.
      JudgeVerdict v;
      v.problem_id = p.id;
      v.left_is_candidate_a = candidate_is_a;
      const bool candidate_nonempty = !cand.empty();
      v.winner = (candidate_nonempty == candidate_is_a)
                     ? JudgeVerdict::Winner::kLeft
                     : JudgeVerdict::Winner::kRight;
      report.verdicts.push_back(v);
      ++report.pairs_judged;
      if (candidate_nonempty) ++report.wins_candidate;
      if (opts.log) {
        opts.log("win_rate: walkover on '" + p.id + "' (" +
                 (candidate_nonempty ? "baseline" : "candidate") +
                 " rollout empty)");
      }
      continue;
    }

    pending.push_back({i, candidate_is_a});
    lefts.push_back(candidate_is_a ? std::move(cand) : std::move(base));
    rights.push_back(candidate_is_a ? std::move(base) : std::move(cand));
  }

  std::vector<JudgeRequest> requests;
  requests.reserve(pending.size());
  for (std::size_t k = 0; k < pending.size(); ++k) {
    requests.push_back(
        {&problems[pending[k].problem], &lefts[k], &rights[k]});
  }
  std::vector<JudgeOutcome> outcomes = judge.judge_many(requests);

  for (std::size_t k = 0; k < pending.size(); ++k) {
    const Problem& p = problems[pending[k].problem];
    if (!outcomes[k].ok) {
      report.excluded.push_back({p.id, outcomes[k].error});
      continue;
    }
    JudgeVerdict v;
    v.problem_id = p.id;
    v.left_is_candidate_a = pending[k].candidate_is_a;
    v.winner = outcomes[k].verdict == JudgeChoice::kA
                   ? JudgeVerdict::Winner::kLeft
                   : JudgeVerdict::Winner::kRight;
    report.verdicts.push_back(v);
    ++report.pairs_judged;
    const bool candidate_won =
        (v.winner == JudgeVerdict::Winner::kLeft) == v.left_is_candidate_a;
    if (candidate_won) ++report.wins_candidate;
  }

  if (report.pairs_judged > 0) {
    report.win_rate = static_cast<double>(report.wins_candidate) /
                      static_cast<double>(report.pairs_judged);
  }
  return report;
}

namespace {

std::string ordinal(int n) {
  const int mod100 = n % 100;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    switch (n % 10) {
      case 1:
        suffix = "st";
        break;
      case 2:
        suffix = "nd";
        break;
      case 3:
        suffix = "rd";
        break;
    }
  }
  return std::to_string(n) + suffix;
}

}  // namespace

std::string stage_label(int round, StageKind kind) {
  if (kind == StageKind::kRl) {
    if (round == 1) return "1st RL";
    return ordinal(round - 1) + " ARES & " + ordinal(round) + " RL";
  }
  return ordinal(round) + " ARES";
}

StageComparison stage_comparison(const RunManifest& manifest,
                                 const fs::path& run_dir,
                                 const std::vector<Problem>& problems,
                                 Teacher& teacher, std::uint64_t seed,
                                 const EvalOptions& opts) {
  if (manifest.status != RunStatus::kComplete) {
    throw EvalError("stage_comparison requires a COMPLETE manifest (status " +
                    run_status_name(manifest.status) + ")");
  }
  auto load_stage = [&](const std::string& rel) {
    fs::path path = run_dir / rel;
    if (rel.empty() || !fs::exists(path)) {
      throw EvalError("stage checkpoint missing: '" + rel + "'");
    }
    return load_checkpoint(path);
  };

  Policy initial = load_stage(manifest.initial_checkpoint_path);

  StageComparison comparison;
  std::uint64_t stage_index = 0;
  for (const RoundEntry& entry : manifest.rounds) {
    for (StageKind kind : {StageKind::kRl, StageKind::kSft}) {
      const std::string& rel = kind == StageKind::kRl
                                   ? entry.rl_checkpoint_path
                                   : entry.sft_checkpoint_path;
      Policy stage = load_stage(rel);
      StageRow row;
      row.stage_label = stage_label(entry.round_index, kind);
      row.mean_raw_score = mean_raw_score_greedy(stage, problems, teacher,
                                                 opts.max_sentences);
      row.win_rate_vs_initial =
          win_rate(stage, initial, problems, teacher,
                   mix_seed(seed, stage_index), opts)
              .win_rate;
      if (opts.log) {
        opts.log("stage " + row.stage_label + ": mean raw score " +
                 std::to_string(row.mean_raw_score) + ", win rate " +
                 std::to_string(row.win_rate_vs_initial));
      }
      comparison.rows.push_back(std::move(row));
      ++stage_index;
    }
  }
  return comparison;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

std::string win_rate_report_to_json(const WinRateReport& report) {
  json j;
  j["pairs_total"] = report.pairs_total;
  j["pairs_judged"] = report.pairs_judged;
  j["wins_candidate"] = report.wins_candidate;
  j["win_rate"] = report.win_rate;
  json verdicts = json::array();
  for (const JudgeVerdict& v : report.verdicts) {
    verdicts.push_back(
        {{"problem_id", v.problem_id},
         {"winner", v.winner == JudgeVerdict::Winner::kLeft ? "left" : "right"},
         {"left_is_candidate_a", v.left_is_candidate_a}});
  }
  j["verdicts"] = std::move(verdicts);
  json excluded = json::array();
  for (const ExcludedPair& e : report.excluded) {
    excluded.push_back({{"problem_id", e.problem_id}, {"reason", e.reason}});
  }
  j["excluded"] = std::move(excluded);
  j["seed"] = report.seed;
  return j.dump(2);
}

WinRateReport win_rate_report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw EvalError(std::string("invalid win-rate report JSON: ") + e.what());
  }
  WinRateReport report;
  try {
    report.pairs_total = j.at("pairs_total").get<int>();
    report.pairs_judged = j.at("pairs_judged").get<int>();
    report.wins_candidate = j.at("wins_candidate").get<int>();
    report.win_rate = j.at("win_rate").get<double>();
    for (const json& v : j.at("verdicts")) {
      JudgeVerdict verdict;
      verdict.problem_id = v.at("problem_id").get<std::string>();
      const std::string winner = v.at("winner").get<std::string>();
      if (winner != "left" && winner != "right") {
        throw EvalError("unknown verdict winner '" + winner + "'");
      }
      verdict.winner = winner == "left" ? JudgeVerdict::Winner::kLeft
                                        : JudgeVerdict::Winner::kRight;
      verdict.left_is_candidate_a = v.at("left_is_candidate_a").get<bool>();
      report.verdicts.push_back(std::move(verdict));
    }
    for (const json& e : j.at("excluded")) {
      report.excluded.push_back({e.at("problem_id").get<std::string>(),
                                 e.at("reason").get<std::string>()});
    }
    report.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw EvalError(std::string("malformed win-rate report JSON: ") + e.what());
  }
  return report;
}

std::string stage_comparison_to_json(const StageComparison& comparison) {
  json rows = json::array();
  for (const StageRow& row : comparison.rows) {
    rows.push_back({{"stage_label", row.stage_label},
                    {"mean_raw_score", row.mean_raw_score},
                    {"win_rate_vs_initial", row.win_rate_vs_initial}});
  }
  return json{{"stages", std::move(rows)}}.dump(2);
}

std::string stage_comparison_to_csv(const StageComparison& comparison) {
  std::string out = "stage_label,mean_raw_score,win_rate_vs_initial\n";
  char buf[64];
  for (const StageRow& row : comparison.rows) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f\n", row.mean_raw_score,
                  row.win_rate_vs_initial);
    out += row.stage_label;
    out += buf;
  }
  return out;
}

void emit_report(const WinRateReport& report, ReportFormat format,
                 const fs::path& path) {
  if (format == ReportFormat::kJson) {
    atomic_write_file(path, win_rate_report_to_json(report) + "\n");
    return;
  }
  std::string csv = "pairs_total,pairs_judged,wins_candidate,win_rate,seed\n";
  csv += std::to_string(report.pairs_total) + "," +
         std::to_string(report.pairs_judged) + "," +
         std::to_string(report.wins_candidate) + ",";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", report.win_rate);
  csv += buf;
  csv += "," + std::to_string(report.seed) + "\n";
  atomic_write_file(path, csv);
}

void emit_report(const StageComparison& comparison, ReportFormat format,
                 const fs::path& path) {
  atomic_write_file(path, format == ReportFormat::kJson
                              ? stage_comparison_to_json(comparison) + "\n"
                              : stage_comparison_to_csv(comparison));
}

}  // namespace ares
