#include "ares/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "ares/errors.hpp"
#include "ares/kernels.hpp"
#include "ares/util.hpp"

namespace ares {

// ---------------------------------------------------------------------------
// SentenceVocab
// ---------------------------------------------------------------------------

SentenceVocab SentenceVocab::from_content_templates(
    const std::vector<std::string>& content) {
  std::vector<std::string> all;
  all.reserve(content.size() + 1);
  all.emplace_back(kStopSymbol);
  for (const std::string& t : content) all.push_back(t);
  return from_templates(std::move(all));
}

SentenceVocab SentenceVocab::from_templates(
    std::vector<std::string> templates) {
  if (templates.size() < 2) {
    throw VocabError("vocabulary needs at least one content template");
  }
  if (templates[0] != kStopSymbol) {
    throw VocabError("vocabulary template 0 must be the STOP symbol, got '" +
                     templates[0] + "'");
  }
  SentenceVocab v;
  v.templates_ = std::move(templates);
  for (std::size_t i = 1; i < v.templates_.size(); ++i) {
    auto s = make_sentence(v.templates_[i]);
    if (!s.has_value()) {
      throw VocabError("vocabulary template " + std::to_string(i) +
                       " is empty");
    }
    if (s->text != v.templates_[i]) {
      throw VocabError("vocabulary template '" + v.templates_[i] +
                       "' has surrounding whitespace");
    }
    if (!s->terminal) {
      throw VocabError("vocabulary template '" + v.templates_[i] +
                       "' does not end with a sentence terminator");
    }
  }
  v.rebuild_index();
  return v;
}

void SentenceVocab::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (!index_.emplace(templates_[i], static_cast<int>(i)).second) {
      throw VocabError("duplicate vocabulary template '" + templates_[i] +
                       "'");
    }
  }
  std::uint64_t h = kFnvOffset;
  for (const std::string& t : templates_) {
    h = fnv1a64_u64(t.size(), h);
    h = fnv1a64(t, h);
  }
  hash_ = h;
}

std::optional<int> SentenceVocab::index_of(std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool SentenceVocab::extends(const SentenceVocab& prefix) const {
  if (prefix.templates_.size() > templates_.size()) return false;
  return std::equal(prefix.templates_.begin(), prefix.templates_.end(),
                    templates_.begin());
}

void SentenceVocab::append_template(const std::string& text) {
  auto s = make_sentence(text);
  if (!s.has_value() || s->text != text || !s->terminal) {
    throw VocabError("cannot extend vocabulary with non-terminal or padded "
                     "template '" +
                     text + "'");
  }
  if (index_.count(text)) {
    throw VocabError("vocabulary already contains template '" + text + "'");
  }
  templates_.push_back(text);
  rebuild_index();
}

// ---------------------------------------------------------------------------
// Policy params and distributions
// ---------------------------------------------------------------------------

std::size_t PolicyStateHash::operator()(const PolicyState& s) const {
  std::uint64_t h = fnv1a64(s.problem_id);
  h = fnv1a64_u64(static_cast<std::uint64_t>(s.step), h);
  h = fnv1a64_u64(static_cast<std::uint64_t>(
                      static_cast<std::int64_t>(s.last_action)),
                  h);
  return static_cast<std::size_t>(h);
}

Policy make_uniform_policy(const SentenceVocab& vocab) {
  Policy policy;
  policy.vocab = vocab;
  policy.params.version = 1;
  policy.params.vocab_hash = vocab.hash();
  policy.params.vocab_size = vocab.size();
  return policy;
}

namespace {

void check_vocab(const PolicyParams& params, const SentenceVocab& vocab) {
  if (params.vocab_hash != vocab.hash()) {
    throw VocabError("policy params were trained with a different "
                     "vocabulary (params hash " +
                     to_hex(params.vocab_hash) + ", vocab hash " +
                     to_hex(vocab.hash()) + ")");
  }
}

// The state's logit vector, or the implicit all-zero vector when unseen.
const std::vector<double>& logits_of(const PolicyParams& params,
                                     const PolicyState& state,
                                     std::vector<double>& scratch) {
  auto it = params.logits.find(state);
  if (it != params.logits.end()) return it->second;
  scratch.assign(static_cast<std::size_t>(params.vocab_size), 0.0);
  return scratch;
}

}  // namespace

std::vector<double> action_distribution(const PolicyParams& params,
                                        const SentenceVocab& vocab,
                                        const PolicyState& state) {
  check_vocab(params, vocab);
  std::vector<double> scratch;
  const std::vector<double>& z = logits_of(params, state, scratch);
  std::vector<double> probs(z.size());
  kernels::softmax(z.data(), probs.data(), z.size());
  return probs;
}

std::vector<double> action_log_distribution(const PolicyParams& params,
                                            const SentenceVocab& vocab,
                                            const PolicyState& state) {
  check_vocab(params, vocab);
  std::vector<double> scratch;
  const std::vector<double>& z = logits_of(params, state, scratch);
  std::vector<double> lp(z.size());
  kernels::log_softmax(z.data(), lp.data(), z.size());
  return lp;
}

namespace {

// Index of the maximum probability, ties to the lower index.
int argmax(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Indices of the top_k probabilities, ordered by (probability desc, index
// asc) so the restriction is deterministic under ties.
std::vector<int> top_k_indices(const std::vector<double>& probs, int k) {
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return probs[a] > probs[b];
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

SampleResult sample_rationale(const PolicyParams& params,
                              const SentenceVocab& vocab, const Problem& p,
                              int top_k, int max_sentences,
                              std::mt19937_64& rng) {
  if (top_k < 1) {
    throw Error("sample_rationale: top_k must be >= 1, got " +
                std::to_string(top_k));
  }
  if (max_sentences < 1) {
    throw Error("sample_rationale: max_sentences must be >= 1, got " +
                std::to_string(max_sentences));
  }
  check_vocab(params, vocab);
  const int k = std::min(top_k, vocab.size());

  SampleResult result;
  PolicyState state{p.id, 0, kStartAction};
  while (true) {
    std::vector<double> probs = action_distribution(params, vocab, state);
    int action;
    if (k == 1) {
      action = argmax(probs);
    } else {
      std::vector<int> candidates = top_k_indices(probs, k);
      double total = 0.0;
      for (int c : candidates) total += probs[c];
      double u = uniform_double(rng) * total;
      double acc = 0.0;
      action = candidates.back();
      for (int c : candidates) {
        acc += probs[c];
        if (u < acc) {
          action = c;
          break;
        }
      }
    }
    std::vector<double> lp(probs.size());
    {
      std::vector<double> scratch;
      const std::vector<double>& z = logits_of(params, state, scratch);
      kernels::log_softmax(z.data(), lp.data(), z.size());
    }
    result.actions.push_back(action);
    result.log_probs.push_back(lp[action]);
    if (action == kStopAction) break;
    auto s = make_sentence(vocab.text_of(action));
    result.rationale.sentences.push_back(std::move(*s));
    if (static_cast<int>(result.rationale.size()) >= max_sentences) break;
    state = PolicyState{p.id, state.step + 1, action};
  }
  return result;
}

Rationale greedy_rationale(const PolicyParams& params,
                           const SentenceVocab& vocab, const Problem& p,
                           int max_sentences) {
  std::mt19937_64 unused(0);
  return sample_rationale(params, vocab, p, /*top_k=*/1, max_sentences, unused)
      .rationale;
}

std::vector<double> log_prob_of(const PolicyParams& params,
                                const SentenceVocab& vocab, const Problem& p,
                                const Rationale& r) {
  check_vocab(params, vocab);
  std::vector<int> actions;
  actions.reserve(r.size() + 1);
  for (const Sentence& s : r.sentences) {
    std::optional<int> idx = vocab.index_of(s.text);
    if (!idx.has_value()) {
      throw VocabError("sentence not in vocabulary: '" + s.text + "'");
    }
    actions.push_back(*idx);
  }
  actions.push_back(kStopAction);

  std::vector<double> out;
  out.reserve(actions.size());
  PolicyState state{p.id, 0, kStartAction};
  for (int action : actions) {
    std::vector<double> lp = action_log_distribution(params, vocab, state);
    out.push_back(lp[action]);
    state = PolicyState{p.id, state.step + 1, action};
  }
  return out;
}

std::vector<double> grad_log_prob(const PolicyParams& params,
                                  const PolicyState& state, int action) {
  std::vector<double> scratch;
  const std::vector<double>& z = logits_of(params, state, scratch);
  std::vector<double> grad(z.size());
  kernels::softmax(z.data(), grad.data(), z.size());
  for (double& g : grad) g = -g;
  grad[action] += 1.0;
  return grad;
}

void apply_gradient(PolicyParams& params, const GradMap& grad,
                    double learning_rate, double scale) {
  const double a = -learning_rate * scale;
  if (a == 0.0) return;
  for (const auto& [state, g] : grad) {
    auto [it, inserted] = params.logits.try_emplace(
        state, std::vector<double>(g.size(), 0.0));
    kernels::axpy(a, g.data(), it->second.data(), g.size());
  }
}

// ---------------------------------------------------------------------------
// Digest and checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

std::vector<const std::pair<const PolicyState, std::vector<double>>*>
sorted_entries(const PolicyParams& params) {
  std::vector<const std::pair<const PolicyState, std::vector<double>>*> out;
  out.reserve(params.logits.size());
  for (const auto& kv : params.logits) out.push_back(&kv);
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    const PolicyState& x = a->first;
    const PolicyState& y = b->first;
    if (x.problem_id != y.problem_id) return x.problem_id < y.problem_id;
    if (x.step != y.step) return x.step < y.step;
    return x.last_action < y.last_action;
  });
  return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_i32(std::string& buf, std::int32_t v) {
  put_u32(buf, static_cast<std::uint32_t>(v));
}

void put_string(std::string& buf, std::string_view s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s.data(), s.size());
}

void put_double(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(buf, bits);
}

class ByteReader {
 public:
  ByteReader(std::string_view data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw CheckpointError("checkpoint file truncated: " + path_);
    }
  }

  std::string_view data_;
  std::string path_;
  std::size_t pos_ = 0;
};

constexpr char kCheckpointMagic[8] = {'A', 'R', 'E', 'S',
                                      'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointFormat = 1;

std::string serialize_policy(const Policy& policy) {
  const PolicyParams& params = policy.params;
  std::string buf;
  buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(buf, kCheckpointFormat);
  put_u32(buf, static_cast<std::uint32_t>(params.version));
  put_u64(buf, params.vocab_hash);
  put_u32(buf, static_cast<std::uint32_t>(policy.vocab.size()));
  for (const std::string& t : policy.vocab.templates()) {
    put_string(buf, t);
  }
  auto entries = sorted_entries(params);
  put_u64(buf, entries.size());
  for (const auto* e : entries) {
    put_string(buf, e->first.problem_id);
    put_i32(buf, e->first.step);
    put_i32(buf, e->first.last_action);
    for (double v : e->second) put_double(buf, v);
  }
  put_u32(buf, crc32(buf.data(), buf.size()));
  return buf;
}

}  // namespace

std::string params_digest(const PolicyParams& params) {
  std::uint64_t h = kFnvOffset;
  h = fnv1a64_u64(static_cast<std::uint64_t>(params.version), h);
  h = fnv1a64_u64(params.vocab_hash, h);
  h = fnv1a64_u64(static_cast<std::uint64_t>(params.vocab_size), h);
  for (const auto* e : sorted_entries(params)) {
    h = fnv1a64(e->first.problem_id, h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(e->first.step), h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(
                        static_cast<std::int64_t>(e->first.last_action)),
                    h);
    for (double v : e->second) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      h = fnv1a64_u64(bits, h);
    }
  }
  return to_hex(h);
}

void save_checkpoint(const Policy& policy, const std::filesystem::path& path) {
  if (policy.params.vocab_hash != policy.vocab.hash()) {
    throw CheckpointError(
        "refusing to save checkpoint: params/vocab hash mismatch");
  }
  if (policy.params.vocab_size != policy.vocab.size()) {
    throw CheckpointError(
        "refusing to save checkpoint: params vocab_size disagrees with "
        "vocabulary");
  }
  atomic_write_file(path, serialize_policy(policy));
}

Policy load_checkpoint(const std::filesystem::path& path) {
  std::string data = read_file(path);
  if (data.size() < sizeof(kCheckpointMagic) + 4) {
    throw CheckpointError("checkpoint file truncated: " + path.string());
  }
  if (std::memcmp(data.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) !=
      0) {
    throw CheckpointError("not a checkpoint file (bad magic): " +
                          path.string());
  }
  // CRC over everything except the trailing checksum.
  std::size_t body = data.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(data[body + i]))
              << (8 * i);
  }
  if (crc32(data.data(), body) != stored) {
    throw CheckpointError("checkpoint checksum mismatch (corrupt file): " +
                          path.string());
  }

  ByteReader r(
      std::string_view(data).substr(sizeof(kCheckpointMagic),
                                    body - sizeof(kCheckpointMagic)),
      path.string());
  std::uint32_t format = r.u32();
  if (format != kCheckpointFormat) {
    throw CheckpointError("unsupported checkpoint format version " +
                          std::to_string(format) + " in " + path.string());
  }
  Policy policy;
  policy.params.version = static_cast<int>(r.u32());
  policy.params.vocab_hash = r.u64();
  std::uint32_t n_templates = r.u32();
  std::vector<std::string> templates;
  templates.reserve(n_templates);
  for (std::uint32_t i = 0; i < n_templates; ++i) {
    templates.push_back(r.str());
  }
  try {
    policy.vocab = SentenceVocab::from_templates(std::move(templates));
  } catch (const VocabError& e) {
    throw CheckpointError("checkpoint " + path.string() +
                          " holds an invalid vocabulary: " + e.what());
  }
  if (policy.vocab.hash() != policy.params.vocab_hash) {
    throw CheckpointError(
        "checkpoint vocab hash does not match its templates (corrupt "
        "file): " +
        path.string());
  }
  policy.params.vocab_size = policy.vocab.size();

  std::uint64_t n_entries = r.u64();
  for (std::uint64_t i = 0; i < n_entries; ++i) {
    PolicyState state;
    state.problem_id = r.str();
    state.step = r.i32();
    state.last_action = r.i32();
    std::vector<double> vec(static_cast<std::size_t>(policy.vocab.size()));
    for (double& v : vec) v = r.f64();
    policy.params.logits.emplace(std::move(state), std::move(vec));
  }
  if (!r.at_end()) {
    throw CheckpointError("checkpoint has trailing bytes after entries: " +
                          path.string());
  }
  return policy;
}

Policy load_checkpoint(const std::filesystem::path& path,
                       const SentenceVocab& expected_vocab) {
  Policy policy = load_checkpoint(path);
  if (policy.params.vocab_hash != expected_vocab.hash()) {
    throw CheckpointError("checkpoint " + path.string() +
                          " was saved with a different vocabulary (hash " +
                          to_hex(policy.params.vocab_hash) + ", expected " +
                          to_hex(expected_vocab.hash()) + ")");
  }
  return policy;
}

}  // namespace ares
