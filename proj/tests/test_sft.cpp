#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/sft.hpp"
#include "ares/teacher.hpp"
#include "ares/util.hpp"

#include "fixture.hpp"

using namespace ares;

namespace {

// Correction-side failure injectors built on the scripted teacher.
class CorrectionOutage : public ScriptedTeacher {
 public:
  CorrectionOutage(std::uint64_t seed, std::string bad_id)
      : ScriptedTeacher(seed), bad_id_(std::move(bad_id)) {}
  Rationale correct(const Problem& p, const Rationale& cleaned) override {
    if (p.id == bad_id_) throw TeacherError("correction offline");
    return ScriptedTeacher::correct(p, cleaned);
  }

 private:
  std::string bad_id_;
};

class FragmentCorrector : public ScriptedTeacher {
 public:
  using ScriptedTeacher::ScriptedTeacher;
  Rationale correct(const Problem&, const Rationale&) override {
    return Rationale{{*make_sentence("Trailing off without"),
                      *make_sentence("A full stop.")}};
  }
};

class EmptyCorrector : public ScriptedTeacher {
 public:
  using ScriptedTeacher::ScriptedTeacher;
  Rationale correct(const Problem&, const Rationale&) override {
    return Rationale{};
  }
};

SFTConfig base_cfg() {
  SFTConfig cfg;
  cfg.seed = 13;
  return cfg;
}

CorrectionDataset one_record_dataset(const SentenceVocab& v) {
  CorrectionDataset ds;
  ds.round = 1;
  ds.source_checkpoint = "test";
  CorrectionRecord rec;
  rec.problem_id = "solo";
  rec.original = Rationale{};
  rec.corrected = Rationale{{*make_sentence(v.text_of(3)),
                             *make_sentence(v.text_of(7)),
                             *make_sentence(v.text_of(12))}};
  ds.records.push_back(std::move(rec));
  return ds;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and dataset construction
// ---------------------------------------------------------------------------

TEST_CASE("sft config validation rejects out-of-range fields") {
  auto expect_reject = [](auto&& tweak) {
    SFTConfig cfg;
    tweak(cfg);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  };
  CHECK_NOTHROW(SFTConfig{}.validate());
  expect_reject([](SFTConfig& c) { c.epochs = 0; });
  expect_reject([](SFTConfig& c) { c.batch_size = 0; });
  expect_reject([](SFTConfig& c) { c.max_sentences = 0; });
  expect_reject([](SFTConfig& c) { c.learning_rate = -1.0; });
  expect_reject([](SFTConfig& c) { c.learning_rate = std::nan(""); });
}

TEST_CASE("the correction dataset rebuilds every fixture gold") {
  const SentenceVocab v = testfix::vocab();
  const auto problems = testfix::problems(10);
  const Policy pol = testfix::crafted_initial_policy(v, problems);
  ScriptedTeacher teacher(3);

  const CorrectionDataset ds =
      build_correction_dataset(pol, problems, teacher, base_cfg(), 1);

  CHECK(ds.round == 1);
  CHECK(ds.source_checkpoint == params_digest(pol.params));
  REQUIRE(ds.records.size() == problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const CorrectionRecord& rec = ds.records[i];
    CHECK(rec.problem_id == problems[i].id);
    // The crafted policy greedily emits one junk sentence (or nothing when
    // STOP-biased); junk scores 0.6 < 0.8 so the correction is exactly the
    // gold rationale.
    CHECK(rec.corrected == *problems[i].gold_rationale);
    if (testfix::stop_biased(i)) {
      CHECK(rec.original.empty());
    } else {
      REQUIRE(rec.original.size() == 1);
      CHECK(rec.original.sentences[0].text ==
            testfix::content_templates()[testfix::junk_content_index(i)]);
    }
    // Dataset invariants: fully terminal and dedup-clean.
    for (const Sentence& s : rec.corrected.sentences) CHECK(s.terminal);
    CHECK(dedup_sentences(rec.corrected.sentences) ==
          rec.corrected.sentences);
    CHECK(!rec.corrected.empty());
  }
}

TEST_CASE("failed, empty, and fragment corrections are skipped with a log") {
  const SentenceVocab v = testfix::vocab();
  const auto problems = testfix::problems(4);
  const Policy pol = testfix::crafted_initial_policy(v, problems);

  std::vector<std::string> log_lines;
  const LogFn log = [&](const std::string& s) { log_lines.push_back(s); };

  CorrectionOutage outage(3, problems[1].id);
  CorrectionDataset ds =
      build_correction_dataset(pol, problems, outage, base_cfg(), 1, log);
  CHECK(ds.records.size() == problems.size() - 1);
  for (const CorrectionRecord& rec : ds.records) {
    CHECK(rec.problem_id != problems[1].id);
  }
  REQUIRE(log_lines.size() == 1);
  CHECK(log_lines[0].find(problems[1].id) != std::string::npos);
  CHECK(log_lines[0].find("correction offline") != std::string::npos);

  log_lines.clear();
  FragmentCorrector fragments(3);
  CHECK_THROWS_AS(
      build_correction_dataset(pol, problems, fragments, base_cfg(), 1, log),
      TeacherError);
  REQUIRE(log_lines.size() == problems.size());
  CHECK(log_lines[0].find("non-terminal") != std::string::npos);

  EmptyCorrector empties(3);
  CHECK_THROWS_AS(
      build_correction_dataset(pol, problems, empties, base_cfg(), 1),
      TeacherError);
}

// ---------------------------------------------------------------------------
// Dataset serialization
// ---------------------------------------------------------------------------

TEST_CASE("correction datasets survive the JSONL round-trip") {
  testfix::TempDir dir("sft");
  const SentenceVocab v = testfix::vocab();
  const auto problems = testfix::problems(6);
  const Policy pol = testfix::crafted_initial_policy(v, problems);
  ScriptedTeacher teacher(3);
  const CorrectionDataset ds =
      build_correction_dataset(pol, problems, teacher, base_cfg(), 2);

  const auto path = dir / "corrections.jsonl";
  save_correction_dataset(ds, path);
  const CorrectionDataset back = load_correction_dataset(path);

  CHECK(back.round == ds.round);
  CHECK(back.source_checkpoint == ds.source_checkpoint);
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].problem_id == ds.records[i].problem_id);
    CHECK(back.records[i].original == ds.records[i].original);
    CHECK(back.records[i].corrected == ds.records[i].corrected);
  }

  // One JSONL line per record, each independently parseable.
  const std::string text = correction_dataset_to_jsonl(ds);
  std::size_t lines = 0;
  for (char c : text) lines += (c == '\n');
  CHECK(lines == ds.records.size());
}

TEST_CASE("correction dataset loading fails with line numbers") {
  testfix::TempDir dir("sft");
  auto write = [&](const std::string& name, const std::string& text) {
    atomic_write_file(dir / name, text);
    return dir / name;
  };
  const std::string good =
      R"({"problem_id":"p1","original":["A."],"corrected":["B."],"round":1,"source_checkpoint":"c"})";

  CHECK_THROWS_WITH_AS(
      load_correction_dataset(write("bad2.jsonl", good + "\nnot json\n")),
      doctest::Contains("line 2"), Error);
  CHECK_THROWS_WITH_AS(
      load_correction_dataset(write(
          "missing.jsonl", R"({"problem_id":"p1","original":[]})" "\n")),
      doctest::Contains("missing or mistyped"), Error);
  CHECK_THROWS_WITH_AS(
      load_correction_dataset(write(
          "empty-corr.jsonl",
          R"({"problem_id":"p1","original":[],"corrected":[],"round":1,"source_checkpoint":"c"})"
          "\n")),
      doctest::Contains("corrected rationale is empty"), Error);
  CHECK_THROWS_WITH_AS(
      load_correction_dataset(write(
          "fragment.jsonl",
          R"({"problem_id":"p1","original":[],"corrected":["no stop"],"round":1,"source_checkpoint":"c"})"
          "\n")),
      doctest::Contains("not terminal"), Error);
  const std::string other_round =
      R"({"problem_id":"p2","original":[],"corrected":["B."],"round":2,"source_checkpoint":"c"})";
  CHECK_THROWS_WITH_AS(
      load_correction_dataset(
          write("mixed.jsonl", good + "\n" + other_round + "\n")),
      doctest::Contains("different round"), Error);
  CHECK_THROWS_WITH_AS(load_correction_dataset(write("empty.jsonl", "\n\n")),
                       doctest::Contains("empty"), Error);
  CHECK_THROWS_AS(load_correction_dataset(dir / "absent.jsonl"), Error);

  // Blank lines between records are tolerated.
  const CorrectionDataset ds =
      load_correction_dataset(write("blank.jsonl", good + "\n\n" + good + "\n"));
  CHECK(ds.records.size() == 2);
}

// ---------------------------------------------------------------------------
// Vocabulary extension and example mapping
// ---------------------------------------------------------------------------

TEST_CASE("extend_vocab_for_dataset pads every stored logit vector") {
  const SentenceVocab v = testfix::vocab();
  const auto problems = testfix::problems(4);
  Policy pol = testfix::crafted_initial_policy(v, problems);
  const int old_size = pol.vocab.size();
  const std::uint64_t old_hash = pol.vocab.hash();

  CorrectionDataset ds;
  ds.round = 1;
  ds.source_checkpoint = "x";
  CorrectionRecord rec;
  rec.problem_id = problems[0].id;
  rec.corrected = Rationale{{*make_sentence(v.text_of(1)),
                             *make_sentence("Entirely new sentence one."),
                             *make_sentence("Entirely new sentence two.")}};
  ds.records.push_back(rec);

  const int added = extend_vocab_for_dataset(pol, ds);
  CHECK(added == 2);
  CHECK(pol.vocab.size() == old_size + 2);
  CHECK(pol.vocab.hash() != old_hash);
  CHECK(pol.params.vocab_hash == pol.vocab.hash());
  CHECK(pol.params.vocab_size == pol.vocab.size());
  CHECK(pol.vocab.index_of("Entirely new sentence one.") == old_size);
  for (const auto& [state, logits] : pol.params.logits) {
    REQUIRE(static_cast<int>(logits.size()) == old_size + 2);
    CHECK(logits[old_size] == 0.0);
    CHECK(logits[old_size + 1] == 0.0);
  }
  // The extension preserves the prefix relation used by eval.
  CHECK(pol.vocab.extends(v));

  // Idempotent: nothing further to add.
  CHECK(extend_vocab_for_dataset(pol, ds) == 0);
}

TEST_CASE("map_dataset appends STOP and rejects unknown sentences") {
  const SentenceVocab v = testfix::vocab();
  Policy pol = make_uniform_policy(v);

  CorrectionDataset ds = one_record_dataset(v);
  const auto examples = map_dataset(pol, ds);
  REQUIRE(examples.size() == 1);
  CHECK(examples[0].problem_id == "solo");
  CHECK(examples[0].actions == std::vector<int>{3, 7, 12, kStopAction});

  ds.records[0].corrected.sentences.push_back(*make_sentence("Unmapped."));
  CHECK_THROWS_WITH_AS(map_dataset(pol, ds), doctest::Contains("Unmapped."),
                       VocabError);
}

// ---------------------------------------------------------------------------
// NLL and its gradient
// ---------------------------------------------------------------------------

TEST_CASE("uniform-policy NLL has the closed form length * log V") {
  const SentenceVocab v = testfix::vocab();
  const Policy pol = make_uniform_policy(v);
  const auto examples = map_dataset(pol, one_record_dataset(v));
  const double nll = sft_nll(pol.params, v, examples);
  // 3 sentences + STOP = 4 uniform choices over 21 actions.
  CHECK(nll == doctest::Approx(4.0 * std::log(21.0)).epsilon(1e-12));

  CHECK_THROWS_AS(sft_nll(pol.params, v, {}), Error);
}

TEST_CASE("the analytic sft gradient matches finite differences") {
  const SentenceVocab v =
      SentenceVocab::from_content_templates({"A.", "B.", "C.", "D."});
  std::mt19937_64 rng(77);
  const double h = 1e-5;

  for (int it = 0; it < 40; ++it) {
    std::vector<SftExample> examples;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < n; ++e) {
      SftExample ex;
      ex.problem_id = "fd" + std::to_string(e);
      const int len = 1 + static_cast<int>(rng() % 3);
      for (int i = 0; i < len; ++i) {
        ex.actions.push_back(1 + static_cast<int>(rng() % 4));
      }
      ex.actions.push_back(kStopAction);
      examples.push_back(std::move(ex));
    }

    PolicyParams params;
    params.vocab_hash = v.hash();
    params.vocab_size = v.size();
    for (const SftExample& ex : examples) {
      PolicyState s{ex.problem_id, 0, kStartAction};
      for (int action : ex.actions) {
        auto [it2, inserted] =
            params.logits.try_emplace(s, std::vector<double>(v.size(), 0.0));
        if (inserted) {
          for (double& z : it2->second) {
            z = (uniform_double(rng) - 0.5) * 5.0;
          }
        }
        s = PolicyState{ex.problem_id, s.step + 1, action};
      }
    }

    GradMap grad;
    sft_nll(params, v, examples, &grad);
    for (auto& [state, g] : grad) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        auto nll_at = [&](double delta) {
          PolicyParams perturbed = params;
          perturbed.logits[state][j] += delta;
          return sft_nll(perturbed, v, examples);
        };
        const double fd = (nll_at(h) - nll_at(-h)) / (2.0 * h);
        const double scale = std::max({1.0, std::fabs(g[j]), std::fabs(fd)});
        CHECK(std::fabs(g[j] - fd) <= 1e-6 * scale);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Stage update
// ---------------------------------------------------------------------------

TEST_CASE("sft on a single record converges to exact greedy reproduction") {
  const SentenceVocab v = testfix::vocab();
  Policy pol = make_uniform_policy(v);
  const CorrectionDataset ds = one_record_dataset(v);

  SFTConfig cfg = base_cfg();
  cfg.learning_rate = 0.5;
  cfg.epochs = 50;
  auto [updated, report] = sft_update(pol, ds, cfg, 1);

  Problem p;
  p.id = "solo";
  p.question = "q";
  p.options = {"a"};
  const Rationale greedy =
      greedy_rationale(updated.params, updated.vocab, p, 8);
  CHECK(greedy == ds.records[0].corrected);

  CHECK(report.round == 1);
  CHECK(report.seed == cfg.seed);
  CHECK(report.extended_vocab_by == 0);
  REQUIRE(report.nll_per_epoch.size() == 50);
  // Full-batch descent on a smooth convex-per-state objective: monotone.
  for (std::size_t i = 1; i < report.nll_per_epoch.size(); ++i) {
    CHECK(report.nll_per_epoch[i] <= report.nll_per_epoch[i - 1]);
  }
  CHECK(report.mean_seq_prob_after > report.mean_seq_prob_before);
  CHECK(report.mean_seq_prob_before ==
        doctest::Approx(std::pow(21.0, -4.0)).epsilon(1e-9));
  CHECK(report.mean_seq_prob_after > 0.8);
}

TEST_CASE("sft greedily reproduces every corrected rationale on the fixture") {
  const SentenceVocab v = testfix::vocab();
  const auto problems = testfix::problems(6);
  const Policy pol = testfix::crafted_initial_policy(v, problems);
  ScriptedTeacher teacher(3);
  const CorrectionDataset ds =
      build_correction_dataset(pol, problems, teacher, base_cfg(), 1);

  SFTConfig cfg = base_cfg();
  cfg.learning_rate = 1.0;
  cfg.epochs = 30;
  auto [updated, report] = sft_update(pol, ds, cfg, 1);

  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Rationale greedy =
        greedy_rationale(updated.params, updated.vocab, problems[i], 8);
    CHECK(greedy == ds.records[i].corrected);
  }

  // Determinism: bitwise identical across repeat runs.
  auto [updated2, report2] = sft_update(pol, ds, cfg, 1);
  CHECK(params_digest(updated2.params) == params_digest(updated.params));
  CHECK(report2.nll_per_epoch == report.nll_per_epoch);
}

TEST_CASE("sft extends the vocabulary when corrections demand it") {
  const SentenceVocab v = testfix::vocab();
  Policy pol = make_uniform_policy(v);

  CorrectionDataset ds = one_record_dataset(v);
  ds.records[0].corrected.sentences.push_back(
      *make_sentence("A brand new closing line."));

  SFTConfig cfg = base_cfg();
  cfg.learning_rate = 0.5;
  cfg.epochs = 40;
  auto [updated, report] = sft_update(pol, ds, cfg, 1);

  CHECK(report.extended_vocab_by == 1);
  CHECK(updated.vocab.size() == v.size() + 1);
  CHECK(updated.vocab.extends(v));
  REQUIRE(updated.vocab.index_of("A brand new closing line.").has_value());

  Problem p;
  p.id = "solo";
  p.question = "q";
  p.options = {"a"};
  const Rationale greedy =
      greedy_rationale(updated.params, updated.vocab, p, 8);
  CHECK(greedy == ds.records[0].corrected);

  CorrectionDataset empty;
  CHECK_THROWS_AS(sft_update(pol, empty, cfg, 1), Error);
}

TEST_CASE("a zero learning rate leaves sft a no-op with a flat nll curve") {
  const SentenceVocab v = testfix::vocab();
  const Policy pol = make_uniform_policy(v);
  const CorrectionDataset ds = one_record_dataset(v);

  SFTConfig cfg = base_cfg();
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  auto [updated, report] = sft_update(pol, ds, cfg, 1);
  CHECK(params_digest(updated.params) == params_digest(pol.params));
  CHECK(report.mean_seq_prob_after == report.mean_seq_prob_before);
  for (double nll : report.nll_per_epoch) {
    CHECK(nll == report.nll_per_epoch[0]);
  }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

TEST_CASE("sft stage reports survive the JSON round-trip") {
  SFTStageReport r;
  r.round = 3;
  r.nll_per_epoch = {2.5, 1.25, 0.8};
  r.mean_seq_prob_before = 1e-4;
  r.mean_seq_prob_after = 0.93;
  r.extended_vocab_by = 4;
  r.seed = 0xABCDEFull;

  const SFTStageReport back = sft_report_from_json(sft_report_to_json(r));
  CHECK(back.round == r.round);
  CHECK(back.nll_per_epoch == r.nll_per_epoch);
  CHECK(back.mean_seq_prob_before == r.mean_seq_prob_before);
  CHECK(back.mean_seq_prob_after == r.mean_seq_prob_after);
  CHECK(back.extended_vocab_by == r.extended_vocab_by);
  CHECK(back.seed == r.seed);

  CHECK_THROWS_AS(sft_report_from_json("nope"), Error);
  CHECK_THROWS_AS(sft_report_from_json(R"({"stage":"rl"})"), Error);
}
