#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ares/policy.hpp"
#include "ares/teacher.hpp"

namespace ares {

// Progress/log sink shared by the stage functions; no-op when empty.
using LogFn = std::function<void(const std::string&)>;

// One sampled rollout with everything PPO needs.  All lists share the same
// length; actions include the terminal STOP when the rollout stopped by
// choosing it (a rollout cut off at max_sentences has no STOP entry).
// The STOP step carries raw score 0.5 -- the neutral value -- so stopping is
// advantage-free before normalization.
struct Trajectory {
  std::string problem_id;
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> raw_scores;
  std::vector<double> rewards;
  std::vector<double> returns;
  std::vector<double> advantages;
};

// The conditioning state at step t of a trajectory.
PolicyState trajectory_state(const Trajectory& traj, std::size_t t);

struct RLConfig {
  double learning_rate = 0.05;
  int ppo_epochs = 10;
  int batch_size = 8;
  double clip_range = 0.2;
  double kl_coef = 0.0001;
  double discount = 1.0;
  int top_k = 50;
  int samples_per_problem = 4;
  bool advantage_normalization = true;
  int grad_accum_steps = 1;
  std::uint64_t seed = 0;
  // Sampling horizon; mirrors the policy section's max_sentences.
  int max_sentences = 8;
  // When set, every collected trajectory is appended to this JSONL file.
  std::string trajectory_dump_path;

  void validate() const;  // throws ConfigError
};

// rewards[i] = scores[i] - 0.5, one IEEE subtraction per element.
std::vector<double> shift_rewards(const std::vector<double>& scores);

// returns[i] = sum_{j>=i} discount^(j-i) * rewards[j], computed by the
// backward recurrence returns[i] = rewards[i] + discount * returns[i+1].
std::vector<double> compute_returns(const std::vector<double>& rewards,
                                    double discount);

// Fills traj.advantages: returns minus the per-step batch-mean baseline,
// then (when cfg.advantage_normalization) standardized over the whole batch
// to mean 0 / std 1, skipping the division when std < 1e-8.
// Throws on an empty batch.
void compute_advantages(std::vector<Trajectory>& batch, const RLConfig& cfg);

struct PpoStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double mean_kl = 0.0;
};

// Per-step diagnostics for property tests (surrogate clipping identities).
struct PpoTermDiag {
  double ratio = 0.0;
  double unclipped = 0.0;  // ratio * advantage
  double clipped = 0.0;    // clamp(ratio) * advantage
};

// loss = -mean_t[ min(rho_t * A_t, clip(rho_t, 1-eps, 1+eps) * A_t) ]
//        + kl_coef * mean_t[ KL(pi_new(.|s_t) || pi_old(.|s_t)) ]
// with rho_t = exp(log pi_new(a_t|s_t) - old_log_probs[t]).  Means run over
// every step of every trajectory in the batch.  Optional outputs: stats,
// the analytic gradient w.r.t. the new params' logits, and per-term
// diagnostics.  Throws TrainingError when the loss is non-finite and
// Error on an empty batch.
double ppo_loss(const PolicyParams& params, const PolicyParams& params_old,
                const SentenceVocab& vocab,
                const std::vector<Trajectory>& batch, const RLConfig& cfg,
                PpoStats* stats = nullptr, GradMap* grad = nullptr,
                std::vector<PpoTermDiag>* terms = nullptr);

struct RLStageReport {
  int round = 0;
  double mean_raw_score_before = 0.0;
  double mean_raw_score_after = 0.0;
  double clip_fraction = 0.0;
  double mean_kl = 0.0;
  std::vector<std::string> skipped_problems;
  std::uint64_t seed = 0;
  // Number of parameter applications performed (diagnostic, not part of
  // the serialized report schema).
  int applied_steps = 0;
};

std::string rl_report_to_json(const RLStageReport& report);
RLStageReport rl_report_from_json(const std::string& text);

// One RL stage: collect samples_per_problem rollouts per problem, score them
// through the teacher, build trajectories (returns, advantages), then run
// ppo_epochs of shuffled minibatch gradient-descent steps on ppo_loss with
// the stage-start params as pi_old.  Problems whose scoring fails are
// skipped and reported.  Deterministic given cfg.seed.
std::pair<Policy, RLStageReport> ppo_update(const Policy& policy,
                                            const std::vector<Problem>& problems,
                                            Teacher& teacher,
                                            const RLConfig& cfg, int round,
                                            const LogFn& log = {});

// ---------------------------------------------------------------------------
// Raw-score measurement (shared by RL reports and the eval harness)
// ---------------------------------------------------------------------------

struct MeasureOptions {
  int samples = 4;
  int top_k = 50;
  int max_sentences = 8;
  std::uint64_t seed = 0;
};

// Mean teacher score over all content sentences of sampled rollouts
// (samples per problem, per-problem RNG derived from seed).  Rollouts that
// are empty contribute nothing; problems whose scoring fails are skipped;
// 0.0 when nothing was scored.
double mean_raw_score_sampled(const Policy& policy,
                              const std::vector<Problem>& problems,
                              Teacher& teacher, const MeasureOptions& opts);

// Same measure over the deterministic greedy rollout of each problem.
double mean_raw_score_greedy(const Policy& policy,
                             const std::vector<Problem>& problems,
                             Teacher& teacher, int max_sentences = 8);

}  // namespace ares
