#include "ares/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ares/errors.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;

std::optional<Sentence> make_sentence(std::string_view raw) {
  std::string_view t = trim(raw);
  if (t.empty()) return std::nullopt;
  Sentence s;
  s.text = std::string(t);
  s.terminal = is_sentence_terminator(t.back());
  return s;
}

std::vector<Sentence> segment_rationale(std::string_view text) {
  // Pass 1: drop backslashes.
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (c != '\\') cleaned.push_back(c);
  }

  // Pass 2: cut after each terminator, skipping one stray 'n' that a
  // stripped "\n" leaves behind.
  std::vector<Sentence> out;
  std::string cur;
  for (std::size_t i = 0; i < cleaned.size(); ++i) {
    char c = cleaned[i];
    cur.push_back(c);
    if (is_sentence_terminator(c)) {
      if (auto s = make_sentence(cur)) out.push_back(std::move(*s));
      cur.clear();
      if (i + 1 < cleaned.size() && cleaned[i + 1] == 'n') {
        ++i;
      }
    }
  }
  if (auto s = make_sentence(cur)) out.push_back(std::move(*s));
  return out;
}

std::vector<Sentence> dedup_sentences(const std::vector<Sentence>& sentences) {
  std::vector<Sentence> out;
  std::unordered_set<std::string> seen;
  for (const Sentence& s : sentences) {
    if (seen.insert(s.text).second) {
      out.push_back(s);
    }
  }
  return out;
}

std::string serialize_rationale(const Rationale& r) {
  std::string out;
  for (std::size_t i = 0; i < r.sentences.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += r.sentences[i].text;
  }
  return out;
}

std::string problem_to_json_line(const Problem& p) {
  json j;
  j["id"] = p.id;
  j["question"] = p.question;
  j["options"] = p.options;
  j["hint"] = p.hint;
  j["answer_index"] = p.answer_index;
  j["has_image"] = p.has_image;
  j["image_caption"] = p.image_caption;
  if (p.gold_rationale.has_value()) {
    json arr = json::array();
    for (const Sentence& s : p.gold_rationale->sentences) {
      arr.push_back(s.text);
    }
    j["gold_rationale"] = arr;
  } else {
    j["gold_rationale"] = nullptr;
  }
  return j.dump();
}

std::string corpus_digest(const std::vector<Problem>& problems) {
  std::uint64_t h = kFnvOffset;
  for (const Problem& p : problems) {
    h = fnv1a64(problem_to_json_line(p), h);
    h = fnv1a64("\n", h);
  }
  return to_hex(h);
}

namespace {

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw CorpusError("corpus line " + std::to_string(line_no) + ": " + msg);
}

Problem parse_problem(const json& j, int line_no) {
  if (!j.is_object()) fail(line_no, "expected a JSON object");

  auto require = [&](const char* key, json::value_t type,
                     const char* type_name) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      fail(line_no, std::string("missing field '") + key + "'");
    }
    bool ok = it->type() == type ||
              (type == json::value_t::number_integer && it->is_number_integer());
    if (!ok) {
      fail(line_no, std::string("field '") + key + "' must be " + type_name);
    }
    return *it;
  };

  Problem p;
  p.id = require("id", json::value_t::string, "a string").get<std::string>();
  if (p.id.empty()) fail(line_no, "field 'id' must be non-empty");
  p.question =
      require("question", json::value_t::string, "a string").get<std::string>();

  const json& opts = require("options", json::value_t::array, "an array");
  for (const json& o : opts) {
    if (!o.is_string()) fail(line_no, "options entries must be strings");
    p.options.push_back(o.get<std::string>());
  }
  if (p.options.empty()) fail(line_no, "options must be non-empty");

  p.hint = require("hint", json::value_t::string, "a string").get<std::string>();
  p.answer_index =
      require("answer_index", json::value_t::number_integer, "an integer")
          .get<int>();
  if (p.answer_index < 0 ||
      p.answer_index >= static_cast<int>(p.options.size())) {
    fail(line_no, "problem '" + p.id + "': answer_index " +
                      std::to_string(p.answer_index) + " out of range [0, " +
                      std::to_string(p.options.size()) + ")");
  }
  p.has_image =
      require("has_image", json::value_t::boolean, "a boolean").get<bool>();
  p.image_caption =
      require("image_caption", json::value_t::string, "a string")
          .get<std::string>();

  auto gr = j.find("gold_rationale");
  if (gr == j.end()) {
    fail(line_no, "missing field 'gold_rationale' (use null when absent)");
  }
  if (!gr->is_null()) {
    if (!gr->is_array()) {
      fail(line_no, "field 'gold_rationale' must be null or an array");
    }
    Rationale gold;
    for (std::size_t i = 0; i < gr->size(); ++i) {
      const json& entry = (*gr)[i];
      if (!entry.is_string()) {
        fail(line_no, "gold_rationale entries must be strings");
      }
      auto s = make_sentence(entry.get<std::string>());
      if (!s.has_value()) {
        fail(line_no, "problem '" + p.id + "': gold_rationale[" +
                          std::to_string(i) + "] is empty");
      }
      if (!s->terminal) {
        fail(line_no, "problem '" + p.id + "': gold_rationale[" +
                          std::to_string(i) + "] ('" + s->text +
                          "') does not end in a sentence terminator");
      }
      gold.sentences.push_back(std::move(*s));
    }
    if (!gold.sentences.empty()) {
      p.gold_rationale = std::move(gold);
    }
  }
  return p;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CorpusError("cannot open corpus file: " + path.string());
  }
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(line_no, std::string("invalid JSON: ") + e.what());
    }
    Problem p = parse_problem(j, line_no);
    if (!ids.insert(p.id).second) {
      fail(line_no, "duplicate problem id '" + p.id + "'");
    }
    corpus.problems.push_back(std::move(p));
  }
  if (in.bad()) {
    throw CorpusError("read failed: " + path.string());
  }
  corpus.digest = corpus_digest(corpus.problems);
  return corpus;
}

void save_corpus(const std::vector<Problem>& problems,
                 const std::filesystem::path& path) {
  std::ostringstream out;
  for (const Problem& p : problems) {
    out << problem_to_json_line(p) << '\n';
  }
  atomic_write_file(path, out.str());
}

}  // namespace ares
