#include "ares/sft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/kernels.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;

void SFTConfig::validate() const {
  if (epochs < 1) {
    throw ConfigError("sft.epochs must be >= 1, got " +
                      std::to_string(epochs));
  }
  if (batch_size < 1) {
    throw ConfigError("sft.batch_size must be >= 1, got " +
                      std::to_string(batch_size));
  }
  if (max_sentences < 1) {
    throw ConfigError("sft.max_sentences must be >= 1, got " +
                      std::to_string(max_sentences));
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("sft.learning_rate must be finite and >= 0");
  }
}

CorrectionDataset build_correction_dataset(const Policy& policy,
                                           const std::vector<Problem>& problems,
                                           Teacher& teacher,
                                           const SFTConfig& cfg, int round,
                                           const LogFn& log) {
  cfg.validate();
  CorrectionDataset dataset;
  dataset.round = round;
  dataset.source_checkpoint = params_digest(policy.params);

  // Greedy rollouts, deduplicated before prompting.
  std::vector<Rationale> cleaned(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    Rationale raw = greedy_rationale(policy.params, policy.vocab, problems[i],
                                     cfg.max_sentences);
    cleaned[i] = Rationale{dedup_sentences(raw.sentences)};
  }

  std::vector<CorrectionRequest> requests;
  requests.reserve(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    requests.push_back(CorrectionRequest{&problems[i], &cleaned[i]});
  }
  std::vector<CorrectionOutcome> outcomes = teacher.correct_many(requests);

  for (std::size_t i = 0; i < problems.size(); ++i) {
    const std::string& pid = problems[i].id;
    auto skip = [&](const std::string& reason) {
      if (log) log("sft: skipping problem '" + pid + "' (" + reason + ")");
    };
    if (!outcomes[i].ok) {
      skip("correction failed: " + outcomes[i].error);
      continue;
    }
    Rationale corrected{dedup_sentences(outcomes[i].corrected.sentences)};
    if (corrected.empty()) {
      skip("corrected rationale is empty");
      continue;
    }
    bool fragment = false;
    for (const Sentence& s : corrected.sentences) {
      if (!s.terminal) {
        skip("corrected rationale contains non-terminal sentence '" + s.text +
             "'");
        fragment = true;
        break;
      }
    }
    if (fragment) continue;
    dataset.records.push_back(
        CorrectionRecord{pid, cleaned[i], std::move(corrected)});
  }

  if (dataset.records.empty()) {
    throw TeacherError(
        "build_correction_dataset: every correction failed (" +
        std::to_string(problems.size()) + " problems)");
  }
  return dataset;
}

std::string correction_dataset_to_jsonl(const CorrectionDataset& dataset) {
  std::ostringstream out;
  for (const CorrectionRecord& rec : dataset.records) {
    json j;
    j["problem_id"] = rec.problem_id;
    json orig = json::array();
    for (const Sentence& s : rec.original.sentences) orig.push_back(s.text);
    j["original"] = orig;
    json corr = json::array();
    for (const Sentence& s : rec.corrected.sentences) corr.push_back(s.text);
    j["corrected"] = corr;
    j["round"] = dataset.round;
    j["source_checkpoint"] = dataset.source_checkpoint;
    out << j.dump() << '\n';
  }
  return out.str();
}

void save_correction_dataset(const CorrectionDataset& dataset,
                             const std::filesystem::path& path) {
  atomic_write_file(path, correction_dataset_to_jsonl(dataset));
}

CorrectionDataset load_correction_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open correction dataset: " + path.string());
  }
  CorrectionDataset dataset;
  bool first = true;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw Error("correction dataset line " + std::to_string(line_no) + ": " +
                msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    auto sentences_of = [&](const json& arr,
                            const char* field) -> std::vector<Sentence> {
      if (!arr.is_array()) fail(std::string(field) + " must be an array");
      std::vector<Sentence> out;
      for (const json& entry : arr) {
        if (!entry.is_string()) {
          fail(std::string(field) + " entries must be strings");
        }
        auto s = make_sentence(entry.get<std::string>());
        if (!s.has_value()) fail(std::string(field) + " has an empty entry");
        out.push_back(std::move(*s));
      }
      return out;
    };
    if (!j.contains("problem_id") || !j["problem_id"].is_string() ||
        !j.contains("original") || !j.contains("corrected") ||
        !j.contains("round") || !j["round"].is_number_integer() ||
        !j.contains("source_checkpoint") ||
        !j["source_checkpoint"].is_string()) {
      fail("missing or mistyped fields");
    }
    CorrectionRecord rec;
    rec.problem_id = j["problem_id"].get<std::string>();
    rec.original = Rationale{sentences_of(j["original"], "original")};
    rec.corrected = Rationale{sentences_of(j["corrected"], "corrected")};
    if (rec.corrected.empty()) fail("corrected rationale is empty");
    for (const Sentence& s : rec.corrected.sentences) {
      if (!s.terminal) {
        fail("corrected sentence '" + s.text + "' is not terminal");
      }
    }
    int round = j["round"].get<int>();
    std::string source = j["source_checkpoint"].get<std::string>();
    if (first) {
      dataset.round = round;
      dataset.source_checkpoint = source;
      first = false;
    } else if (round != dataset.round ||
               source != dataset.source_checkpoint) {
      fail("record belongs to a different round or source checkpoint");
    }
    dataset.records.push_back(std::move(rec));
  }
  if (dataset.records.empty()) {
    throw Error("correction dataset is empty: " + path.string());
  }
  return dataset;
}

int extend_vocab_for_dataset(Policy& policy, const CorrectionDataset& dataset) {
  int added = 0;
  for (const CorrectionRecord& rec : dataset.records) {
    for (const Sentence& s : rec.corrected.sentences) {
      if (!policy.vocab.index_of(s.text).has_value()) {
        policy.vocab.append_template(s.text);
        ++added;
      }
    }
  }
  if (added > 0) {
    for (auto& [state, logits] : policy.params.logits) {
      logits.resize(static_cast<std::size_t>(policy.vocab.size()), 0.0);
    }
    policy.params.vocab_hash = policy.vocab.hash();
    policy.params.vocab_size = policy.vocab.size();
  }
  return added;
}

std::vector<SftExample> map_dataset(const Policy& policy,
                                    const CorrectionDataset& dataset) {
  std::vector<SftExample> examples;
  examples.reserve(dataset.records.size());
  for (const CorrectionRecord& rec : dataset.records) {
    SftExample ex;
    ex.problem_id = rec.problem_id;
    for (const Sentence& s : rec.corrected.sentences) {
      std::optional<int> idx = policy.vocab.index_of(s.text);
      if (!idx.has_value()) {
        throw VocabError("corrected sentence not in vocabulary: '" + s.text +
                         "'");
      }
      ex.actions.push_back(*idx);
    }
    ex.actions.push_back(kStopAction);
    examples.push_back(std::move(ex));
  }
  return examples;
}

double sft_nll(const PolicyParams& params, const SentenceVocab& vocab,
               const std::vector<SftExample>& examples, GradMap* grad) {
  if (examples.empty()) {
    throw Error("sft_nll: empty example list");
  }
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  double nll = 0.0;
  for (const SftExample& ex : examples) {
    PolicyState state{ex.problem_id, 0, kStartAction};
    for (std::size_t t = 0; t < ex.actions.size(); ++t) {
      const int action = ex.actions[t];
      std::vector<double> lp = action_log_distribution(params, vocab, state);
      nll -= lp[action] * inv_n;
      if (grad != nullptr) {
        auto [it, inserted] =
            grad->try_emplace(state, std::vector<double>(lp.size(), 0.0));
        std::vector<double>& g = it->second;
        // d(-log pi)/dz = softmax - onehot.
        for (std::size_t j = 0; j < lp.size(); ++j) {
          g[j] += std::exp(lp[j]) * inv_n;
        }
        g[action] -= inv_n;
      }
      state = PolicyState{ex.problem_id, state.step + 1, action};
    }
  }
  if (!std::isfinite(nll)) {
    throw TrainingError("sft_nll diverged (non-finite loss over " +
                        std::to_string(examples.size()) + " examples)");
  }
  return nll;
}

namespace {

void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

double mean_sequence_prob(const PolicyParams& params,
                          const SentenceVocab& vocab,
                          const std::vector<SftExample>& examples) {
  double sum = 0.0;
  for (const SftExample& ex : examples) {
    PolicyState state{ex.problem_id, 0, kStartAction};
    double log_seq = 0.0;
    for (int action : ex.actions) {
      std::vector<double> lp = action_log_distribution(params, vocab, state);
      log_seq += lp[action];
      state = PolicyState{ex.problem_id, state.step + 1, action};
    }
    sum += std::exp(log_seq);
  }
  return sum / static_cast<double>(examples.size());
}

}  // namespace

std::pair<Policy, SFTStageReport> sft_update(const Policy& policy,
                                             const CorrectionDataset& dataset,
                                             const SFTConfig& cfg, int round,
                                             const LogFn& log) {
  cfg.validate();
  if (dataset.records.empty()) {
    throw Error("sft_update: empty correction dataset");
  }

  Policy updated = policy;
  SFTStageReport report;
  report.round = round;
  report.seed = cfg.seed;
  report.extended_vocab_by = extend_vocab_for_dataset(updated, dataset);

  std::vector<SftExample> examples = map_dataset(updated, dataset);
  report.mean_seq_prob_before =
      mean_sequence_prob(updated.params, updated.vocab, examples);

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5F7u));
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<SftExample> minibatch;
      minibatch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        minibatch.push_back(examples[order[i]]);
      }
      GradMap grad;
      try {
        sft_nll(updated.params, updated.vocab, minibatch, &grad);
      } catch (const TrainingError& e) {
        throw TrainingError("sft stage diverged at epoch " +
                            std::to_string(epoch) + ": " + e.what());
      }
      apply_gradient(updated.params, grad, cfg.learning_rate, 1.0);
    }
    double epoch_nll = sft_nll(updated.params, updated.vocab, examples);
    report.nll_per_epoch.push_back(epoch_nll);
    if (log && (epoch == 0 || epoch + 1 == cfg.epochs)) {
      log("sft: epoch " + std::to_string(epoch + 1) + "/" +
          std::to_string(cfg.epochs) + " nll " + std::to_string(epoch_nll));
    }
  }

  report.mean_seq_prob_after =
      mean_sequence_prob(updated.params, updated.vocab, examples);
  return {std::move(updated), std::move(report)};
}

std::string sft_report_to_json(const SFTStageReport& report) {
  json j;
  j["stage"] = "sft";
  j["round"] = report.round;
  j["nll_per_epoch"] = report.nll_per_epoch;
  j["mean_seq_prob_before"] = report.mean_seq_prob_before;
  j["mean_seq_prob_after"] = report.mean_seq_prob_after;
  j["extended_vocab_by"] = report.extended_vocab_by;
  j["seed"] = report.seed;
  return j.dump(2);
}

SFTStageReport sft_report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid sft report JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("stage", "") != "sft") {
    throw Error("sft report JSON is missing stage == \"sft\"");
  }
  SFTStageReport report;
  try {
    report.round = j.at("round").get<int>();
    report.nll_per_epoch = j.at("nll_per_epoch").get<std::vector<double>>();
    report.mean_seq_prob_before = j.at("mean_seq_prob_before").get<double>();
    report.mean_seq_prob_after = j.at("mean_seq_prob_after").get<double>();
    report.extended_vocab_by = j.at("extended_vocab_by").get<int>();
    report.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed sft report JSON: ") + e.what());
  }
  return report;
}

}  // namespace ares
