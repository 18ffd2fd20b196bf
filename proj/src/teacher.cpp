#include "ares/teacher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <unordered_set>

#include "ares/errors.hpp"
#include "ares/util.hpp"

namespace ares {

bool is_on_score_grid(double v) {
  if (!(v >= 0.0 && v <= 1.0)) return false;
  double tenths = v * 10.0;
  return std::abs(tenths - std::round(tenths)) <= 1e-8;
}

// ---------------------------------------------------------------------------
// Prompt builders
// ---------------------------------------------------------------------------

namespace {

// The instruction texts below are fixed; tests assert them by substring.

constexpr std::string_view kScorePreambleImage =
    "There exists a set comprising Image, Options, Hint, and Answer for a "
    "Question.";
constexpr std::string_view kScorePreambleNoImage =
    "There exists a set comprising Options, Hint, and Answer for a Question.";
constexpr std::string_view kScoreInstruction =
    "The reasoning process used to deduce the answer is provided in JSON "
    "format. Fill in \"xxx\" with values ranging from 0.0 to 1.0, in "
    "increments of 0.1. The reasoning may include the starting point of "
    "thought, the process of elimination, or true statements, although these "
    "may not appear to be directly related to the answer at first glance. A "
    "value closer to 0.0 indicates a completely incorrect rationale, 0.5 "
    "indicates a neutral rationale such as the initial thought process or "
    "true statements that guide later guesses towards the answer, and a "
    "value closer to 1.0 denotes a correct or relevant rationale for the "
    "question. Please just fill the \"xxx\" parts and only return the JSON "
    "format. If a sentence is repetitive (appeared before), then give 0.0.";

constexpr std::string_view kCorrectionPreambleImage =
    "Your task involves reviewing a set that includes an Image, Options, "
    "Hint, Answer, and Rationales for a Question. Please follow below 7 "
    "rules.";
constexpr std::string_view kCorrectionPreambleNoImage =
    "Your task involves reviewing a set that includes Options, Hint, Answer, "
    "and Rationales for a Question. Please follow below 7 rules.";
constexpr std::string_view kCorrectionRules =
    "1. Preserve any correct original rationales based on the given answer "
    "by incorporating them into the final rationale without making any "
    "alterations.\n"
    "2. Preserve any original rationales that represent the starting point "
    "of thought.\n"
    "3. Correct any grammatical errors or incomplete rationales based on the "
    "given information without your knowledge.\n"
    "4. If there are incorrect rationales based on the given answer, please "
    "correct them without removing them based on the given information.\n"
    "5. Please take into account the content of the options, hint, and "
    "answer when doing this task.\n"
    "6. Fill the corrected rationales inside the {} in the final_rationale "
    "according to the given format below, without any additional "
    "explanation.\n"
    "7. Return only the entire set of Rationales within curly braces ({}) "
    "below with the filled one in the step 6.";

constexpr std::string_view kJudgeInstruction =
    "You are given two rationales options (A or B). Your job is to select "
    "the better rationale between A and B for solving the given problem "
    "with the given Image, Choices, Hint, and Answer. Please output only A "
    "or B.";

std::string format_options(const std::vector<std::string>& options) {
  std::string out = "[";
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i > 0) out += ", ";
    out += options[i];
  }
  out += "]";
  return out;
}

// JSON string literal (quoted, escaped) for embedding sentence texts as
// object keys in the score prompt.
std::string json_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x",
                        static_cast<unsigned>(static_cast<unsigned char>(c)));
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out += "\"";
  return out;
}

// The shared problem block.  The image caption line is the textual
// stand-in for the picture itself; it appears only when the problem has
// one.
void append_problem_block(std::string& out, const Problem& p,
                          std::string_view options_label) {
  if (p.has_image) {
    out += "Image: ";
    out += p.image_caption;
    out += "\n";
  }
  out += "Question: ";
  out += p.question;
  out += "\n";
  out += options_label;
  out += ": ";
  out += format_options(p.options);
  out += "\n";
  out += "Hint: ";
  out += p.hint;
  out += "\n";
  out += "Answer: ";
  out += p.answer_text();
  out += "\n";
}

}  // namespace

std::string build_score_prompt(const Problem& p,
                               const std::vector<Sentence>& sentences) {
  if (sentences.empty()) {
    throw Error("build_score_prompt: empty rationale for problem '" + p.id +
                "'");
  }
  std::string out;
  out += p.has_image ? kScorePreambleImage : kScorePreambleNoImage;
  out += " ";
  out += kScoreInstruction;
  out += "\n\n";
  append_problem_block(out, p, "Options");
  out += "\n{\n";
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out += json_quote(sentences[i].text);
    out += ": xxx";
    if (i + 1 < sentences.size()) out += ",";
    out += "\n";
  }
  out += "}\n";
  return out;
}

std::string build_correction_prompt(const Problem& p,
                                    const Rationale& cleaned) {
  std::string out;
  out += p.has_image ? kCorrectionPreambleImage : kCorrectionPreambleNoImage;
  out += "\n";
  out += kCorrectionRules;
  out += "\n\n";
  append_problem_block(out, p, "Options");
  out += "\nRationales:\n{\noriginal_rationale:{";
  out += serialize_rationale(cleaned);
  out += "}\nfinal_rationale:{}\n}\n";
  return out;
}

std::string build_judge_prompt(const Problem& p, const Rationale& option_a,
                               const Rationale& option_b) {
  if (option_a.empty() || option_b.empty()) {
    throw Error("build_judge_prompt: empty rationale for problem '" + p.id +
                "'");
  }
  std::string out;
  out += kJudgeInstruction;
  out += "\n\n";
  append_problem_block(out, p, "Choices");
  out += "\nOPTION A: ";
  out += serialize_rationale(option_a);
  out += "\nOPTION B: ";
  out += serialize_rationale(option_b);
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Response parsers
// ---------------------------------------------------------------------------

namespace {

struct FlatPair {
  std::string key;
  double value;
};

void skip_ws(std::string_view s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' ||
                          s[i] == '\r')) {
    ++i;
  }
}

// Parses a JSON string starting at s[i] == '"'.  Returns false on any
// malformation.  \uXXXX escapes are decoded to UTF-8 (surrogate pairs
// included).
bool parse_json_string(std::string_view s, std::size_t& i, std::string& out) {
  if (i >= s.size() || s[i] != '"') return false;
  ++i;
  out.clear();
  auto read_hex4 = [&](std::size_t& j, unsigned& v) {
    if (j + 4 > s.size()) return false;
    v = 0;
    for (int k = 0; k < 4; ++k) {
      char c = s[j + k];
      v <<= 4;
      if (c >= '0' && c <= '9') {
        v |= static_cast<unsigned>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        v |= static_cast<unsigned>(c - 'a' + 10);
      } else if (c >= 'A' && c <= 'F') {
        v |= static_cast<unsigned>(c - 'A' + 10);
      } else {
        return false;
      }
    }
    j += 4;
    return true;
  };
  auto append_utf8 = [&](unsigned cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == '"') {
      ++i;
      return true;
    }
    if (c == '\\') {
      ++i;
      if (i >= s.size()) return false;
      char e = s[i++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '/': out.push_back('/'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'u': {
          unsigned cp = 0;
          if (!read_hex4(i, cp)) return false;
          if (cp >= 0xD800 && cp <= 0xDBFF) {
            if (i + 1 < s.size() && s[i] == '\\' && s[i + 1] == 'u') {
              std::size_t j = i + 2;
              unsigned lo = 0;
              if (!read_hex4(j, lo) || lo < 0xDC00 || lo > 0xDFFF) {
                return false;
              }
              cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
              i = j;
            } else {
              return false;
            }
          }
          append_utf8(cp);
          break;
        }
        default:
          return false;
      }
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return false;  // unterminated
}

bool parse_json_number(std::string_view s, std::size_t& i, double& out) {
  std::size_t start = i;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
  bool digits = false;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    ++i;
    digits = true;
  }
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      digits = true;
    }
  }
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t save = i;
    ++i;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
    bool exp_digits = false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      exp_digits = true;
    }
    if (!exp_digits) i = save;
  }
  if (!digits) return false;
  out = std::strtod(std::string(s.substr(start, i - start)).c_str(), nullptr);
  return true;
}

// Attempts to read a flat {"string": number, ...} object starting at
// s[start] == '{'.  Duplicate keys are preserved in order -- this is why the
// object is hand-parsed instead of handed to a JSON library, which would
// collapse repeated sentence keys.
bool try_parse_flat_object(std::string_view s, std::size_t start,
                           std::vector<FlatPair>& pairs) {
  pairs.clear();
  std::size_t i = start;
  if (i >= s.size() || s[i] != '{') return false;
  ++i;
  skip_ws(s, i);
  if (i < s.size() && s[i] == '}') return true;
  while (true) {
    skip_ws(s, i);
    FlatPair pair;
    if (!parse_json_string(s, i, pair.key)) return false;
    skip_ws(s, i);
    if (i >= s.size() || s[i] != ':') return false;
    ++i;
    skip_ws(s, i);
    if (!parse_json_number(s, i, pair.value)) return false;
    pairs.push_back(std::move(pair));
    skip_ws(s, i);
    if (i >= s.size()) return false;
    if (s[i] == ',') {
      ++i;
      continue;
    }
    if (s[i] == '}') return true;
    return false;
  }
}

std::string preview(std::string_view s, std::size_t limit = 80) {
  std::string out(s.substr(0, limit));
  if (s.size() > limit) out += "...";
  return out;
}

// Inner text of the balanced-brace block following "<marker> : {".  Every
// occurrence of the marker is tried until one carries a block, so prose
// that merely mentions the marker does not derail extraction.  Throws
// ParseError describing how far matching got.
std::string_view braced_block_after(std::string_view raw,
                                    std::string_view marker) {
  std::size_t search_from = 0;
  bool saw_marker = false;
  while (true) {
    std::size_t m = raw.find(marker, search_from);
    if (m == std::string_view::npos) break;
    saw_marker = true;
    std::size_t i = m + marker.size();
    skip_ws(raw, i);
    if (i < raw.size() && raw[i] == ':') {
      ++i;
      skip_ws(raw, i);
      if (i < raw.size() && raw[i] == '{') {
        std::size_t open = i;
        int depth = 0;
        for (std::size_t j = open; j < raw.size(); ++j) {
          if (raw[j] == '{') ++depth;
          if (raw[j] == '}') {
            --depth;
            if (depth == 0) return raw.substr(open + 1, j - open - 1);
          }
        }
        throw ParseError("unbalanced braces after " + std::string(marker) +
                         ": '" + preview(raw.substr(m)) + "'");
      }
    }
    search_from = m + marker.size();
  }
  if (saw_marker) {
    throw ParseError("no braced block after " + std::string(marker) + ": '" +
                     preview(raw) + "'");
  }
  throw ParseError("no " + std::string(marker) + " marker: '" + preview(raw) +
                   "'");
}

}  // namespace

ScoreResponse parse_score_response(std::string_view raw,
                                   const std::vector<Sentence>& expected) {
  if (expected.empty()) {
    throw ParseError("parse_score_response: expected sentence list is empty");
  }
  std::vector<FlatPair> pairs;
  bool found = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '{' && try_parse_flat_object(raw, i, pairs)) {
      found = true;
      break;
    }
  }
  if (!found) {
    throw ParseError("no JSON object found in teacher response: '" +
                     preview(raw) + "'");
  }
  if (pairs.size() < expected.size()) {
    throw ParseError("score response is missing an entry for sentence '" +
                     expected[pairs.size()].text + "' (got " +
                     std::to_string(pairs.size()) + " of " +
                     std::to_string(expected.size()) + ")");
  }
  if (pairs.size() > expected.size()) {
    throw ParseError("score response has extra entries: expected " +
                     std::to_string(expected.size()) + " sentences, got " +
                     std::to_string(pairs.size()) + " (first extra key: '" +
                     pairs[expected.size()].key + "')");
  }
  ScoreResponse resp;
  resp.scores.reserve(expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (std::string(trim(pairs[i].key)) != expected[i].text) {
      throw ParseError("score response entry " + std::to_string(i) +
                       " has key '" + pairs[i].key +
                       "', expected sentence '" + expected[i].text + "'");
    }
    double v = pairs[i].value;
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ParseError("score for sentence '" + expected[i].text + "' is " +
                       std::to_string(v) + ", outside [0, 1]");
    }
    if (!is_on_score_grid(v)) {
      throw ParseError("score for sentence '" + expected[i].text + "' is " +
                       std::to_string(v) + ", not on the 0.1 grid");
    }
    resp.scores.push_back(v);
  }
  return resp;
}

Rationale parse_correction_response(std::string_view raw) {
  std::string_view inner = braced_block_after(raw, "final_rationale");
  std::vector<Sentence> sentences = segment_rationale(inner);
  if (sentences.empty()) {
    throw ParseError("correction response has an empty final_rationale");
  }
  return Rationale{std::move(sentences)};
}

JudgeChoice parse_judge_response(std::string_view raw) {
  std::string_view t = trim(raw);
  if (t == "A") return JudgeChoice::kA;
  if (t == "B") return JudgeChoice::kB;
  throw ParseError("unparseable judge verdict (expected 'A' or 'B'): '" +
                   preview(raw) + "'");
}

// ---------------------------------------------------------------------------
// Canned-response renderers and prompt readers
// ---------------------------------------------------------------------------

std::string render_score_response(const std::vector<Sentence>& sentences,
                                  const ScoreResponse& scores) {
  if (sentences.size() != scores.scores.size()) {
    throw Error("render_score_response: " +
                std::to_string(scores.scores.size()) + " scores for " +
                std::to_string(sentences.size()) + " sentences");
  }
  std::string out = "{\n";
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    double s = scores.scores[i];
    if (!is_on_score_grid(s)) {
      throw Error("render_score_response: score " + std::to_string(s) +
                  " is not on the 0.1 grid");
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%.1f", s);
    out += json_quote(sentences[i].text);
    out += ": ";
    out += buf;
    if (i + 1 < sentences.size()) out += ",";
    out += "\n";
  }
  out += "}";
  return out;
}

std::string render_correction_response(const Rationale& corrected) {
  return "final_rationale:{" + serialize_rationale(corrected) + "}";
}

std::string read_prompt_question(std::string_view prompt) {
  constexpr std::string_view kMarker = "\nQuestion: ";
  std::size_t m = prompt.find(kMarker);
  if (m == std::string_view::npos) {
    throw ParseError("prompt has no Question line: '" + preview(prompt) + "'");
  }
  std::size_t start = m + kMarker.size();
  std::size_t end = prompt.find('\n', start);
  if (end == std::string_view::npos) end = prompt.size();
  return std::string(prompt.substr(start, end - start));
}

std::vector<Sentence> read_score_prompt_sentences(std::string_view prompt) {
  // The rationale block is the prompt's final brace group: one
  // '"<sentence>": xxx' line per sentence.  Keys escape all control
  // characters, so the block boundary "\n{\n" cannot occur inside a key.
  std::size_t open = prompt.rfind("\n{\n");
  if (open == std::string_view::npos) {
    throw ParseError("score prompt has no rationale block: '" +
                     preview(prompt) + "'");
  }
  std::vector<Sentence> out;
  std::size_t i = open + 3;
  while (true) {
    skip_ws(prompt, i);
    if (i >= prompt.size()) {
      throw ParseError("score prompt rationale block is unterminated");
    }
    if (prompt[i] == '}') {
      if (out.empty()) {
        throw ParseError("score prompt rationale block is empty");
      }
      return out;
    }
    if (prompt[i] == ',') {
      ++i;
      continue;
    }
    std::string key;
    if (!parse_json_string(prompt, i, key)) {
      throw ParseError("score prompt rationale block has a malformed key: '" +
                       preview(prompt.substr(i)) + "'");
    }
    skip_ws(prompt, i);
    if (i >= prompt.size() || prompt[i] != ':') {
      throw ParseError("score prompt key '" + key + "' is missing ':'");
    }
    ++i;
    skip_ws(prompt, i);
    constexpr std::string_view kSlot = "xxx";
    if (prompt.substr(i, kSlot.size()) != kSlot) {
      throw ParseError("score prompt key '" + key +
                       "' is missing its xxx slot");
    }
    i += kSlot.size();
    std::optional<Sentence> s = make_sentence(key);
    if (!s.has_value()) {
      throw ParseError("score prompt contains a blank sentence key");
    }
    out.push_back(std::move(*s));
  }
}

Rationale read_correction_prompt_rationale(std::string_view prompt) {
  std::string_view inner = braced_block_after(prompt, "original_rationale");
  return Rationale{segment_rationale(inner)};
}

std::pair<Rationale, Rationale> read_judge_prompt_options(
    std::string_view prompt) {
  constexpr std::string_view kA = "\nOPTION A: ";
  constexpr std::string_view kB = "\nOPTION B: ";
  std::size_t a = prompt.find(kA);
  if (a == std::string_view::npos) {
    throw ParseError("judge prompt has no OPTION A: '" + preview(prompt) +
                     "'");
  }
  std::size_t a_start = a + kA.size();
  std::size_t b = prompt.find(kB, a_start);
  if (b == std::string_view::npos) {
    throw ParseError("judge prompt has no OPTION B: '" + preview(prompt) +
                     "'");
  }
  Rationale left{segment_rationale(prompt.substr(a_start, b - a_start))};
  Rationale right{segment_rationale(prompt.substr(b + kB.size()))};
  if (left.empty() || right.empty()) {
    throw ParseError("judge prompt has an empty option");
  }
  return {std::move(left), std::move(right)};
}

// ---------------------------------------------------------------------------
// Scripted teacher
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize_for_similarity(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

double token_jaccard(std::string_view a, std::string_view b) {
  std::vector<std::string> ta = tokenize_for_similarity(a);
  std::vector<std::string> tb = tokenize_for_similarity(b);
  std::unordered_set<std::string> sa(ta.begin(), ta.end());
  std::unordered_set<std::string> sb(tb.begin(), tb.end());
  std::size_t inter = 0;
  for (const std::string& t : sa) {
    if (sb.count(t)) ++inter;
  }
  std::size_t uni = sa.size() + sb.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double round_to_grid(double v) {
  double g = std::round(v * 10.0) / 10.0;
  if (g < 0.0) g = 0.0;
  if (g > 1.0) g = 1.0;
  return g;
}

// Shared greedy matching pass: for each candidate sentence, its rule-based
// score plus (when a positive-similarity gold match was consumed) the index
// of that gold sentence.
struct MatchResult {
  std::vector<double> scores;
  std::vector<int> matched_gold;  // -1 when no gold was consumed
};

MatchResult match_against_gold(const Rationale& gold,
                               const Rationale& candidate) {
  MatchResult result;
  std::vector<bool> consumed(gold.size(), false);
  std::unordered_set<std::string> seen;
  for (const Sentence& s : candidate.sentences) {
    if (!seen.insert(s.text).second) {
      result.scores.push_back(0.0);
      result.matched_gold.push_back(-1);
      continue;
    }
    if (!s.terminal) {
      result.scores.push_back(0.2);
      result.matched_gold.push_back(-1);
      continue;
    }
    double best = 0.0;
    int best_j = -1;
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (consumed[j]) continue;
      double sim = token_jaccard(s.text, gold.sentences[j].text);
      if (sim > best) {
        best = sim;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0) {
      consumed[best_j] = true;
    }
    result.scores.push_back(round_to_grid(best));
    result.matched_gold.push_back(best_j);
  }
  return result;
}

}  // namespace

ScoreResponse scripted_score(const Rationale& gold,
                             const Rationale& candidate) {
  MatchResult m = match_against_gold(gold, candidate);
  return ScoreResponse{std::move(m.scores)};
}

Rationale scripted_correct(const Rationale& gold, const Rationale& candidate) {
  MatchResult m = match_against_gold(gold, candidate);
  Rationale out;
  std::vector<bool> covered(gold.size(), false);
  for (std::size_t i = 0; i < candidate.sentences.size(); ++i) {
    if (m.scores[i] >= 0.8 && m.matched_gold[i] >= 0) {
      out.sentences.push_back(candidate.sentences[i]);
      covered[m.matched_gold[i]] = true;
    }
  }
  for (std::size_t j = 0; j < gold.size(); ++j) {
    if (!covered[j]) out.sentences.push_back(gold.sentences[j]);
  }
  out.sentences = dedup_sentences(out.sentences);
  return out;
}

JudgeChoice scripted_judge(const Problem& p, const Rationale& option_a,
                           const Rationale& option_b, std::uint64_t seed) {
  if (!p.gold_rationale.has_value()) {
    throw TeacherError("problem '" + p.id +
                       "' has no gold rationale; pair is unjudgeable");
  }
  auto mean_score = [&](const Rationale& r) {
    if (r.empty()) return 0.0;
    ScoreResponse resp = scripted_score(*p.gold_rationale, r);
    double sum = 0.0;
    for (double v : resp.scores) sum += v;
    return sum / static_cast<double>(resp.scores.size());
  };
  double a = mean_score(option_a);
  double b = mean_score(option_b);
  if (a > b) return JudgeChoice::kA;
  if (b > a) return JudgeChoice::kB;
  // Exact tie: a coin keyed by (seed, problem) picks between the two
  // contents, anchored by their digests rather than the slots they occupy,
  // so swapping the options never changes which rationale wins.
  const std::uint64_t ha = fnv1a64(serialize_rationale(option_a));
  const std::uint64_t hb = fnv1a64(serialize_rationale(option_b));
  std::mt19937_64 rng(mix_seed(seed, fnv1a64(p.id)));
  const bool low_digest_wins = (rng() & 1) != 0;
  if (ha == hb) return low_digest_wins ? JudgeChoice::kA : JudgeChoice::kB;
  return ((ha < hb) == low_digest_wins) ? JudgeChoice::kA : JudgeChoice::kB;
}

// ---------------------------------------------------------------------------
// Teacher interface
// ---------------------------------------------------------------------------

std::vector<ScoreOutcome> Teacher::score_many(
    const std::vector<ScoreRequest>& requests) {
  std::vector<ScoreOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].response = score(*requests[i].problem, *requests[i].sentences);
      out[i].ok = true;
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

std::vector<CorrectionOutcome> Teacher::correct_many(
    const std::vector<CorrectionRequest>& requests) {
  std::vector<CorrectionOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].corrected = correct(*requests[i].problem, *requests[i].cleaned);
      out[i].ok = true;
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

std::vector<JudgeOutcome> Teacher::judge_many(
    const std::vector<JudgeRequest>& requests) {
  std::vector<JudgeOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].verdict = judge(*requests[i].problem, *requests[i].option_a,
                             *requests[i].option_b);
      out[i].ok = true;
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

namespace {

const Rationale& require_gold(const Problem& p) {
  if (!p.gold_rationale.has_value()) {
    throw TeacherError("problem '" + p.id +
                       "' has no gold rationale; scripted teacher cannot "
                       "answer");
  }
  return *p.gold_rationale;
}

}  // namespace

ScoreResponse ScriptedTeacher::score(const Problem& p,
                                     const std::vector<Sentence>& sentences) {
  return scripted_score(require_gold(p), Rationale{sentences});
}

Rationale ScriptedTeacher::correct(const Problem& p, const Rationale& cleaned) {
  return scripted_correct(require_gold(p), cleaned);
}

JudgeChoice ScriptedTeacher::judge(const Problem& p, const Rationale& option_a,
                                   const Rationale& option_b) {
  return scripted_judge(p, option_a, option_b, seed_);
}

}  // namespace ares
