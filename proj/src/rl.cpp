#include "ares/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/kernels.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;

PolicyState trajectory_state(const Trajectory& traj, std::size_t t) {
  return PolicyState{traj.problem_id, static_cast<int>(t),
                     t == 0 ? kStartAction
                            : traj.actions[t - 1]};
}

void RLConfig::validate() const {
  if (!(clip_range > 0.0)) {
    throw ConfigError("rl.clip_range must be > 0, got " +
                      std::to_string(clip_range));
  }
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw ConfigError("rl.discount must be in (0, 1], got " +
                      std::to_string(discount));
  }
  if (samples_per_problem < 1) {
    throw ConfigError("rl.samples_per_problem must be >= 1, got " +
                      std::to_string(samples_per_problem));
  }
  if (ppo_epochs < 1) {
    throw ConfigError("rl.ppo_epochs must be >= 1, got " +
                      std::to_string(ppo_epochs));
  }
  if (batch_size < 1) {
    throw ConfigError("rl.batch_size must be >= 1, got " +
                      std::to_string(batch_size));
  }
  if (grad_accum_steps < 1) {
    throw ConfigError("rl.grad_accum_steps must be >= 1, got " +
                      std::to_string(grad_accum_steps));
  }
  if (top_k < 1) {
    throw ConfigError("rl.top_k must be >= 1, got " + std::to_string(top_k));
  }
  if (max_sentences < 1) {
    throw ConfigError("rl.max_sentences must be >= 1, got " +
                      std::to_string(max_sentences));
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("rl.learning_rate must be finite and >= 0");
  }
  if (!(kl_coef >= 0.0) || !std::isfinite(kl_coef)) {
    throw ConfigError("rl.kl_coef must be finite and >= 0");
  }
}

std::vector<double> shift_rewards(const std::vector<double>& scores) {
  for (double v : scores) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error("shift_rewards: score " + std::to_string(v) +
                  " outside [0, 1]");
    }
  }
  std::vector<double> out(scores.size());
  kernels::add_scalar(scores.data(), -0.5, out.data(), scores.size());
  return out;
}

std::vector<double> compute_returns(const std::vector<double>& rewards,
                                    double discount) {
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw Error("compute_returns: discount must be in (0, 1], got " +
                std::to_string(discount));
  }
  std::vector<double> returns(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + discount * acc;
    returns[i] = acc;
  }
  return returns;
}

void compute_advantages(std::vector<Trajectory>& batch, const RLConfig& cfg) {
  if (batch.empty()) {
    throw Error("compute_advantages: empty batch");
  }
  std::size_t max_len = 0;
  for (const Trajectory& t : batch) {
    max_len = std::max(max_len, t.returns.size());
  }

  // Per-step-index baseline: mean return over the trajectories that reach
  // that step.
  std::vector<double> baseline(max_len, 0.0);
  std::vector<std::size_t> count(max_len, 0);
  for (const Trajectory& t : batch) {
    for (std::size_t i = 0; i < t.returns.size(); ++i) {
      baseline[i] += t.returns[i];
      ++count[i];
    }
  }
  for (std::size_t i = 0; i < max_len; ++i) {
    baseline[i] /= static_cast<double>(count[i]);
  }

  for (Trajectory& t : batch) {
    t.advantages.resize(t.returns.size());
    for (std::size_t i = 0; i < t.returns.size(); ++i) {
      t.advantages[i] = t.returns[i] - baseline[i];
    }
  }

  if (!cfg.advantage_normalization) return;

  double sum = 0.0;
  std::size_t n = 0;
  for (const Trajectory& t : batch) {
    sum += kernels::reduce_sum(t.advantages.data(), t.advantages.size());
    n += t.advantages.size();
  }
  double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const Trajectory& t : batch) {
    for (double a : t.advantages) {
      var += (a - mean) * (a - mean);
    }
  }
  var /= static_cast<double>(n);
  double std_dev = std::sqrt(var);
  for (Trajectory& t : batch) {
    for (double& a : t.advantages) {
      a -= mean;
      if (std_dev >= 1e-8) a /= std_dev;
    }
  }
}

double ppo_loss(const PolicyParams& params, const PolicyParams& params_old,
                const SentenceVocab& vocab,
                const std::vector<Trajectory>& batch, const RLConfig& cfg,
                PpoStats* stats, GradMap* grad,
                std::vector<PpoTermDiag>* terms) {
  std::size_t total_terms = 0;
  for (const Trajectory& t : batch) total_terms += t.actions.size();
  if (total_terms == 0) {
    throw Error("ppo_loss: empty batch");
  }
  const double inv_t = 1.0 / static_cast<double>(total_terms);
  const double lo = 1.0 - cfg.clip_range;
  const double hi = 1.0 + cfg.clip_range;

  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  double ratio_sum = 0.0;
  std::size_t clipped_count = 0;

  for (const Trajectory& traj : batch) {
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      const PolicyState state = trajectory_state(traj, t);
      const int action = traj.actions[t];
      const double adv = traj.advantages[t];

      std::vector<double> lp_new =
          action_log_distribution(params, vocab, state);
      std::vector<double> lp_old =
          action_log_distribution(params_old, vocab, state);
      std::vector<double> p_new(lp_new.size());
      for (std::size_t j = 0; j < lp_new.size(); ++j) {
        p_new[j] = std::exp(lp_new[j]);
      }

      const double rho = std::exp(lp_new[action] - traj.old_log_probs[t]);
      const double unclipped = rho * adv;
      const double clamped = std::min(std::max(rho, lo), hi);
      const double clipped = clamped * adv;
      surrogate_sum += std::min(unclipped, clipped);

      const double kl = kernels::weighted_log_diff(
          p_new.data(), lp_new.data(), lp_old.data(), p_new.size());
      kl_sum += kl;
      ratio_sum += rho;
      if (rho < lo || rho > hi) ++clipped_count;

      if (terms != nullptr) {
        terms->push_back(PpoTermDiag{rho, unclipped, clipped});
      }

      if (grad != nullptr) {
        auto [it, inserted] = grad->try_emplace(
            state, std::vector<double>(p_new.size(), 0.0));
        std::vector<double>& g = it->second;
        // Surrogate branch: active only when the unclipped term is the
        // minimum; the clipped branch is flat in theta wherever it wins.
        if (unclipped <= clipped) {
          const double coeff = -adv * rho * inv_t;
          kernels::axpy(-coeff, p_new.data(), g.data(), p_new.size());
          g[action] += coeff;
        }
        // KL branch: d KL / d z_j = p_j * ((lp_j - lq_j) - KL).
        if (cfg.kl_coef != 0.0) {
          const double kc = cfg.kl_coef * inv_t;
          for (std::size_t j = 0; j < p_new.size(); ++j) {
            g[j] += kc * p_new[j] * ((lp_new[j] - lp_old[j]) - kl);
          }
        }
      }
    }
  }

  const double loss = -surrogate_sum * inv_t + cfg.kl_coef * kl_sum * inv_t;
  if (!std::isfinite(loss)) {
    throw TrainingError("ppo_loss diverged (non-finite loss " +
                        std::to_string(loss) + " over " +
                        std::to_string(batch.size()) + " trajectories)");
  }
  if (stats != nullptr) {
    stats->mean_ratio = ratio_sum * inv_t;
    stats->clip_fraction =
        static_cast<double>(clipped_count) * inv_t;
    stats->mean_kl = kl_sum * inv_t;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Stage update
// ---------------------------------------------------------------------------

namespace {

// Deterministic Fisher-Yates; std::shuffle's draw sequence is
// implementation-defined, which would break cross-toolchain reproducibility.
void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

struct CollectedBatch {
  std::vector<Trajectory> trajectories;
  std::vector<std::string> skipped_problems;
};

// Samples rollouts for every problem and scores them through the teacher in
// one batched call.  Trajectories of problems whose scoring failed are
// dropped; the problem is listed as skipped.
CollectedBatch collect_trajectories(const Policy& policy,
                                    const std::vector<Problem>& problems,
                                    Teacher& teacher, const RLConfig& cfg,
                                    const LogFn& log) {
  struct Pending {
    Trajectory traj;
    Rationale rationale;
    std::size_t problem_index;
  };
  std::vector<Pending> pending;
  pending.reserve(problems.size() *
                  static_cast<std::size_t>(cfg.samples_per_problem));

  for (std::size_t i = 0; i < problems.size(); ++i) {
    for (int s = 0; s < cfg.samples_per_problem; ++s) {
      std::mt19937_64 rng(mix_seed(cfg.seed, i, static_cast<std::uint64_t>(s)));
      SampleResult sample =
          sample_rationale(policy.params, policy.vocab, problems[i],
                           cfg.top_k, cfg.max_sentences, rng);
      Pending p;
      p.traj.problem_id = problems[i].id;
      p.traj.actions = std::move(sample.actions);
      p.traj.old_log_probs = std::move(sample.log_probs);
      p.rationale = std::move(sample.rationale);
      p.problem_index = i;
      pending.push_back(std::move(p));
    }
  }

  // Batch all score requests (empty rationales need no teacher call).
  std::vector<ScoreRequest> requests;
  std::vector<std::size_t> request_owner;
  for (std::size_t k = 0; k < pending.size(); ++k) {
    if (!pending[k].rationale.empty()) {
      requests.push_back(ScoreRequest{&problems[pending[k].problem_index],
                                      &pending[k].rationale.sentences});
      request_owner.push_back(k);
    }
  }
  std::vector<ScoreOutcome> outcomes = teacher.score_many(requests);

  std::set<std::string> skipped;
  std::vector<bool> dropped(pending.size(), false);
  std::vector<ScoreResponse> responses(pending.size());
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    std::size_t k = request_owner[r];
    if (!outcomes[r].ok) {
      dropped[k] = true;
      const std::string& pid = pending[k].traj.problem_id;
      if (skipped.insert(pid).second && log) {
        log("rl: skipping problem '" + pid +
            "' (teacher failure: " + outcomes[r].error + ")");
      }
      continue;
    }
    responses[k] = std::move(outcomes[r].response);
  }

  CollectedBatch out;
  for (std::size_t k = 0; k < pending.size(); ++k) {
    Pending& p = pending[k];
    if (dropped[k] || skipped.count(p.traj.problem_id)) continue;
    Trajectory& traj = p.traj;
    traj.raw_scores = std::move(responses[k].scores);
    const bool stopped_by_action =
        !traj.actions.empty() && traj.actions.back() == kStopAction;
    if (stopped_by_action) {
      traj.raw_scores.push_back(0.5);
    }
    if (traj.raw_scores.size() != traj.actions.size()) {
      throw Error("rl: teacher returned " +
                  std::to_string(traj.raw_scores.size()) +
                  " scores for a trajectory of " +
                  std::to_string(traj.actions.size()) + " actions (problem '" +
                  traj.problem_id + "')");
    }
    traj.rewards = shift_rewards(traj.raw_scores);
    out.trajectories.push_back(std::move(traj));
  }
  out.skipped_problems.assign(skipped.begin(), skipped.end());
  return out;
}

void dump_trajectories(const std::vector<Trajectory>& batch,
                       const std::string& path) {
  std::ostringstream out;
  for (const Trajectory& t : batch) {
    json j;
    j["problem_id"] = t.problem_id;
    j["actions"] = t.actions;
    j["old_log_probs"] = t.old_log_probs;
    j["raw_scores"] = t.raw_scores;
    j["rewards"] = t.rewards;
    j["returns"] = t.returns;
    j["advantages"] = t.advantages;
    out << j.dump() << '\n';
  }
  atomic_write_file(path, out.str());
}

}  // namespace

std::pair<Policy, RLStageReport> ppo_update(const Policy& policy,
                                            const std::vector<Problem>& problems,
                                            Teacher& teacher,
                                            const RLConfig& cfg, int round,
                                            const LogFn& log) {
  cfg.validate();
  if (problems.empty()) {
    throw Error("ppo_update: empty corpus slice");
  }

  RLStageReport report;
  report.round = round;
  report.seed = cfg.seed;

  const MeasureOptions measure{cfg.samples_per_problem, cfg.top_k,
                               cfg.max_sentences, mix_seed(cfg.seed, 0xEA11)};
  report.mean_raw_score_before =
      mean_raw_score_sampled(policy, problems, teacher, measure);

  CollectedBatch collected =
      collect_trajectories(policy, problems, teacher, cfg, log);
  report.skipped_problems = collected.skipped_problems;
  std::vector<Trajectory>& batch = collected.trajectories;
  if (batch.empty()) {
    throw TrainingError(
        "ppo_update: no trajectories survived collection (all " +
        std::to_string(problems.size()) + " problems skipped)");
  }

  for (Trajectory& t : batch) {
    t.returns = compute_returns(t.rewards, cfg.discount);
  }
  compute_advantages(batch, cfg);

  if (!cfg.trajectory_dump_path.empty()) {
    dump_trajectories(batch, cfg.trajectory_dump_path);
  }

  const PolicyParams& params_old = policy.params;
  Policy updated = policy;

  double kl_weighted_sum = 0.0;
  double clip_weighted_sum = 0.0;
  std::size_t term_count = 0;

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5Bu));
  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  GradMap accum;
  int accum_count = 0;
  auto flush = [&]() {
    if (accum_count == 0) return;
    apply_gradient(updated.params, accum,
                   cfg.learning_rate, 1.0 / accum_count);
    accum.clear();
    accum_count = 0;
    ++report.applied_steps;
  };

  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    deterministic_shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Trajectory> minibatch;
      minibatch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        minibatch.push_back(batch[order[i]]);
      }

      PpoStats stats;
      GradMap grad;
      try {
        ppo_loss(updated.params, params_old, updated.vocab, minibatch, cfg,
                 &stats, &grad);
      } catch (const TrainingError& e) {
        throw TrainingError("rl stage diverged at epoch " +
                            std::to_string(epoch) + ": " + e.what());
      }
      std::size_t mb_terms = 0;
      for (const Trajectory& t : minibatch) mb_terms += t.actions.size();
      kl_weighted_sum += stats.mean_kl * static_cast<double>(mb_terms);
      clip_weighted_sum +=
          stats.clip_fraction * static_cast<double>(mb_terms);
      term_count += mb_terms;

      // Accumulate the minibatch-mean gradient; apply every
      // grad_accum_steps minibatches.
      for (auto& [state, g] : grad) {
        auto [it, inserted] =
            accum.try_emplace(state, std::vector<double>(g.size(), 0.0));
        kernels::axpy(1.0, g.data(), it->second.data(), g.size());
      }
      ++accum_count;
      if (accum_count >= cfg.grad_accum_steps) flush();
    }
    // A partial accumulation never crosses an epoch boundary.
    flush();
  }

  report.mean_kl = term_count ? kl_weighted_sum / term_count : 0.0;
  report.clip_fraction = term_count ? clip_weighted_sum / term_count : 0.0;
  report.mean_raw_score_after =
      mean_raw_score_sampled(updated, problems, teacher, measure);
  return {std::move(updated), std::move(report)};
}

std::string rl_report_to_json(const RLStageReport& report) {
  json j;
  j["stage"] = "rl";
  j["round"] = report.round;
  j["mean_raw_score_before"] = report.mean_raw_score_before;
  j["mean_raw_score_after"] = report.mean_raw_score_after;
  j["clip_fraction"] = report.clip_fraction;
  j["mean_kl"] = report.mean_kl;
  j["skipped_problems"] = report.skipped_problems;
  j["seed"] = report.seed;
  return j.dump(2);
}

RLStageReport rl_report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid rl report JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("stage", "") != "rl") {
    throw Error("rl report JSON is missing stage == \"rl\"");
  }
  RLStageReport report;
  try {
    report.round = j.at("round").get<int>();
    report.mean_raw_score_before = j.at("mean_raw_score_before").get<double>();
    report.mean_raw_score_after = j.at("mean_raw_score_after").get<double>();
    report.clip_fraction = j.at("clip_fraction").get<double>();
    report.mean_kl = j.at("mean_kl").get<double>();
    report.skipped_problems =
        j.at("skipped_problems").get<std::vector<std::string>>();
    report.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed rl report JSON: ") + e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Raw-score measurement
// ---------------------------------------------------------------------------

namespace {

double mean_of_scored(const std::vector<Rationale>& rationales,
                      const std::vector<const Problem*>& owners,
                      Teacher& teacher) {
  std::vector<ScoreRequest> requests;
  for (std::size_t i = 0; i < rationales.size(); ++i) {
    if (!rationales[i].empty()) {
      requests.push_back(
          ScoreRequest{owners[i], &rationales[i].sentences});
    }
  }
  std::vector<ScoreOutcome> outcomes = teacher.score_many(requests);
  double sum = 0.0;
  std::size_t n = 0;
  for (const ScoreOutcome& o : outcomes) {
    if (!o.ok) continue;
    sum += kernels::reduce_sum(o.response.scores.data(),
                               o.response.scores.size());
    n += o.response.scores.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

double mean_raw_score_sampled(const Policy& policy,
                              const std::vector<Problem>& problems,
                              Teacher& teacher, const MeasureOptions& opts) {
  std::vector<Rationale> rationales;
  std::vector<const Problem*> owners;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    std::mt19937_64 rng(mix_seed(opts.seed, i));
    for (int s = 0; s < opts.samples; ++s) {
      SampleResult sample =
          sample_rationale(policy.params, policy.vocab, problems[i],
                           opts.top_k, opts.max_sentences, rng);
      rationales.push_back(std::move(sample.rationale));
      owners.push_back(&problems[i]);
    }
  }
  return mean_of_scored(rationales, owners, teacher);
}

double mean_raw_score_greedy(const Policy& policy,
                             const std::vector<Problem>& problems,
                             Teacher& teacher, int max_sentences) {
  std::vector<Rationale> rationales;
  std::vector<const Problem*> owners;
  for (const Problem& p : problems) {
    rationales.push_back(
        greedy_rationale(policy.params, policy.vocab, p, max_sentences));
    owners.push_back(&p);
  }
  return mean_of_scored(rationales, owners, teacher);
}

}  // namespace ares
