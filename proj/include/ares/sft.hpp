#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ares/policy.hpp"
#include "ares/rl.hpp"
#include "ares/teacher.hpp"

namespace ares {

struct CorrectionRecord {
  std::string problem_id;
  Rationale original;   // deduplicated greedy rollout sent for correction
  Rationale corrected;  // teacher-corrected target
};

struct CorrectionDataset {
  std::vector<CorrectionRecord> records;
  std::string source_checkpoint;  // params digest of the corrected policy
  int round = 0;
};

struct SFTConfig {
  double learning_rate = 0.5;
  int epochs = 20;
  int batch_size = 8;
  std::uint64_t seed = 0;
  // Greedy-rollout horizon when building the correction dataset; mirrors
  // the policy section's max_sentences.
  int max_sentences = 8;

  void validate() const;  // throws ConfigError
};

// Greedy rollout per problem, dedup, teacher correction.  Problems whose
// correction fails, comes back empty, or contains a non-terminal sentence
// are skipped and logged.  Throws TeacherError when nothing survives.
CorrectionDataset build_correction_dataset(const Policy& policy,
                                           const std::vector<Problem>& problems,
                                           Teacher& teacher,
                                           const SFTConfig& cfg, int round,
                                           const LogFn& log = {});

std::string correction_dataset_to_jsonl(const CorrectionDataset& dataset);
void save_correction_dataset(const CorrectionDataset& dataset,
                             const std::filesystem::path& path);
CorrectionDataset load_correction_dataset(const std::filesystem::path& path);

// Appends every corrected sentence that is missing from the vocabulary (in
// record order), padding existing logit vectors with zeros so old states
// keep their parameters.  Returns the number of templates added.
int extend_vocab_for_dataset(Policy& policy, const CorrectionDataset& dataset);

// One corrected rationale mapped to its action sequence (STOP appended).
struct SftExample {
  std::string problem_id;
  std::vector<int> actions;
};

std::vector<SftExample> map_dataset(const Policy& policy,
                                    const CorrectionDataset& dataset);

// Mean (over examples) sequence negative log-likelihood
//   NLL = -sum_t log pi(a_t | s_t),
// optionally accumulating the analytic gradient (scaled by 1/N_examples).
// Throws TrainingError on non-finite loss.
double sft_nll(const PolicyParams& params, const SentenceVocab& vocab,
               const std::vector<SftExample>& examples,
               GradMap* grad = nullptr);

struct SFTStageReport {
  int round = 0;
  std::vector<double> nll_per_epoch;
  double mean_seq_prob_before = 0.0;
  double mean_seq_prob_after = 0.0;
  int extended_vocab_by = 0;
  std::uint64_t seed = 0;
};

std::string sft_report_to_json(const SFTStageReport& report);
SFTStageReport sft_report_from_json(const std::string& text);

// Maximum-likelihood fine-tuning on the corrected dataset: vocabulary
// extension, then cfg.epochs of shuffled minibatch gradient descent on the
// mean sequence NLL.  Deterministic given cfg.seed.
std::pair<Policy, SFTStageReport> sft_update(const Policy& policy,
                                             const CorrectionDataset& dataset,
                                             const SFTConfig& cfg, int round,
                                             const LogFn& log = {});

}  // namespace ares
