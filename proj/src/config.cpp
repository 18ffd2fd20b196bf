#include "ares/config.hpp"

#include <fstream>
#include <sstream>

#include "ares/errors.hpp"
#include "ares/util.hpp"

namespace ares {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_key(const std::string& where, const std::string& key,
                          const std::string& what) {
  throw ConfigError("config key " + where + "." + key + " " + what);
}

double as_number(const json& v, const std::string& where,
                 const std::string& key) {
  if (!v.is_number()) bad_key(where, key, "must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& where, const std::string& key) {
  if (!v.is_number_integer()) bad_key(where, key, "must be an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& where, const std::string& key) {
  if (!v.is_boolean()) bad_key(where, key, "must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where,
                      const std::string& key) {
  if (!v.is_string()) bad_key(where, key, "must be a string");
  return v.get<std::string>();
}

std::uint64_t as_seed(const json& v, const std::string& where,
                      const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  bad_key(where, key, "must be a non-negative integer");
}

std::string resolve_path(const fs::path& base_dir, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (base_dir / p).string();
}

}  // namespace

json rl_config_to_json(const RLConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"ppo_epochs", cfg.ppo_epochs},
              {"batch_size", cfg.batch_size},
              {"clip_range", cfg.clip_range},
              {"kl_coef", cfg.kl_coef},
              {"discount", cfg.discount},
              {"top_k", cfg.top_k},
              {"samples_per_problem", cfg.samples_per_problem},
              {"advantage_normalization", cfg.advantage_normalization},
              {"grad_accum_steps", cfg.grad_accum_steps},
              {"seed", cfg.seed},
              {"max_sentences", cfg.max_sentences},
              {"trajectory_dump_path", cfg.trajectory_dump_path}};
}

RLConfig rl_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("rl config must be a JSON object");
  RLConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") {
      cfg.learning_rate = as_number(value, "rl", key);
    } else if (key == "ppo_epochs") {
      cfg.ppo_epochs = as_int(value, "rl", key);
    } else if (key == "batch_size") {
      cfg.batch_size = as_int(value, "rl", key);
    } else if (key == "clip_range") {
      cfg.clip_range = as_number(value, "rl", key);
    } else if (key == "kl_coef") {
      cfg.kl_coef = as_number(value, "rl", key);
    } else if (key == "discount") {
      cfg.discount = as_number(value, "rl", key);
    } else if (key == "top_k") {
      cfg.top_k = as_int(value, "rl", key);
    } else if (key == "samples_per_problem") {
      cfg.samples_per_problem = as_int(value, "rl", key);
    } else if (key == "advantage_normalization") {
      cfg.advantage_normalization = as_bool(value, "rl", key);
    } else if (key == "grad_accum_steps") {
      cfg.grad_accum_steps = as_int(value, "rl", key);
    } else if (key == "seed") {
      cfg.seed = as_seed(value, "rl", key);
    } else if (key == "max_sentences") {
      cfg.max_sentences = as_int(value, "rl", key);
    } else if (key == "trajectory_dump_path") {
      cfg.trajectory_dump_path = as_string(value, "rl", key);
    } else {
      throw ConfigError("unknown rl config key '" + key + "'");
    }
  }
  return cfg;
}

json sft_config_to_json(const SFTConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"max_sentences", cfg.max_sentences}};
}

SFTConfig sft_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("sft config must be a JSON object");
  SFTConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") {
      cfg.learning_rate = as_number(value, "sft", key);
    } else if (key == "epochs") {
      cfg.epochs = as_int(value, "sft", key);
    } else if (key == "batch_size") {
      cfg.batch_size = as_int(value, "sft", key);
    } else if (key == "seed") {
      cfg.seed = as_seed(value, "sft", key);
    } else if (key == "max_sentences") {
      cfg.max_sentences = as_int(value, "sft", key);
    } else {
      throw ConfigError("unknown sft config key '" + key + "'");
    }
  }
  return cfg;
}

json apply_config_overrides(json doc,
                            const std::vector<std::string>& overrides) {
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override must look like dotted.path=value, got '" +
                        kv + "'");
    }
    const std::string path = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);

    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // unquoted strings are the common case on a shell line
    }

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(
          start, dot == std::string::npos ? std::string::npos : dot - start);
      if (key.empty()) {
        throw ConfigError("override path '" + path + "' has an empty segment");
      }
      if (dot == std::string::npos) {
        (*node)[key] = std::move(value);
        break;
      }
      if (!node->contains(key) || !(*node)[key].is_object()) {
        (*node)[key] = json::object();
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
  return doc;
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  RunConfig cfg;

  for (const auto& [section, value] : doc.items()) {
    if (section == "corpus") {
      if (!value.is_object()) throw ConfigError("corpus must be an object");
      for (const auto& [key, v] : value.items()) {
        if (key == "path") {
          cfg.corpus_path = resolve_path(base_dir, as_string(v, "corpus", key));
        } else {
          throw ConfigError("unknown corpus config key '" + key + "'");
        }
      }
    } else if (section == "teacher") {
      if (!value.is_object()) throw ConfigError("teacher must be an object");
      for (const auto& [key, v] : value.items()) {
        if (key == "mode") {
          cfg.teacher_mode = teacher_mode_from_name(as_string(v, "teacher", key));
        } else if (key == "endpoint_url") {
          cfg.teacher_http.endpoint_url = as_string(v, "teacher", key);
        } else if (key == "api_key_env_var") {
          cfg.teacher_http.api_key_env_var = as_string(v, "teacher", key);
        } else if (key == "max_retries") {
          cfg.teacher_http.max_retries = as_int(v, "teacher", key);
        } else if (key == "request_timeout_s") {
          cfg.teacher_http.request_timeout_s = as_number(v, "teacher", key);
        } else if (key == "max_parallel_requests") {
          cfg.teacher_http.max_parallel_requests = as_int(v, "teacher", key);
        } else if (key == "backoff_base_ms") {
          cfg.teacher_http.backoff_base_ms = as_int(v, "teacher", key);
        } else {
          throw ConfigError("unknown teacher config key '" + key + "'");
        }
      }
    } else if (section == "policy") {
      if (!value.is_object()) throw ConfigError("policy must be an object");
      for (const auto& [key, v] : value.items()) {
        if (key == "vocab") {
          if (!v.is_array()) bad_key("policy", key, "must be an array");
          for (const json& t : v) {
            cfg.vocab_templates.push_back(as_string(t, "policy", "vocab[]"));
          }
        } else if (key == "vocab_file") {
          cfg.vocab_file = resolve_path(base_dir, as_string(v, "policy", key));
        } else if (key == "init_checkpoint") {
          cfg.init_checkpoint =
              resolve_path(base_dir, as_string(v, "policy", key));
        } else {
          throw ConfigError("unknown policy config key '" + key + "'");
        }
      }
    } else if (section == "rl") {
      if (value.is_object() && value.contains("seed")) {
        throw ConfigError(
            "rl.seed is not a config key; stage seeds derive from the global "
            "seed");
      }
      cfg.rl = rl_config_from_json(value);
    } else if (section == "sft") {
      if (value.is_object() && value.contains("seed")) {
        throw ConfigError(
            "sft.seed is not a config key; stage seeds derive from the "
            "global seed");
      }
      cfg.sft = sft_config_from_json(value);
    } else if (section == "rounds") {
      cfg.rounds = as_int(value, "", "rounds");
    } else if (section == "seed") {
      cfg.seed = as_seed(value, "", "seed");
    } else if (section == "early_stop") {
      if (!value.is_object()) throw ConfigError("early_stop must be an object");
      for (const auto& [key, v] : value.items()) {
        if (key == "enabled") {
          cfg.early_stop = as_bool(v, "early_stop", key);
        } else if (key == "threshold") {
          cfg.early_stop_threshold = as_number(v, "early_stop", key);
        } else {
          throw ConfigError("unknown early_stop config key '" + key + "'");
        }
      }
    } else if (section == "eval") {
      if (!value.is_object()) throw ConfigError("eval must be an object");
      for (const auto& [key, v] : value.items()) {
        if (key == "max_sentences") {
          cfg.eval_max_sentences = as_int(v, "eval", key);
        } else if (key == "candidate_checkpoint") {
          cfg.eval_candidate_checkpoint =
              resolve_path(base_dir, as_string(v, "eval", key));
        } else if (key == "baseline_checkpoint") {
          cfg.eval_baseline_checkpoint =
              resolve_path(base_dir, as_string(v, "eval", key));
        } else if (key == "run_dir") {
          cfg.eval_run_dir = resolve_path(base_dir, as_string(v, "eval", key));
        } else {
          throw ConfigError("unknown eval config key '" + key + "'");
        }
      }
    } else {
      throw ConfigError("unknown config section '" + section + "'");
    }
  }

  if (cfg.corpus_path.empty()) {
    throw ConfigError("config is missing corpus.path");
  }
  if (!cfg.vocab_file.empty()) {
    if (!cfg.vocab_templates.empty()) {
      throw ConfigError("policy.vocab and policy.vocab_file are exclusive");
    }
    std::ifstream in(cfg.vocab_file);
    if (!in) {
      throw ConfigError("cannot open policy.vocab_file: " + cfg.vocab_file);
    }
    std::string line;
    while (std::getline(in, line)) {
      std::string_view t = trim(line);
      if (!t.empty()) cfg.vocab_templates.emplace_back(t);
    }
  }
  if (cfg.init_checkpoint.empty() && cfg.vocab_templates.empty()) {
    throw ConfigError(
        "config needs policy.vocab, policy.vocab_file, or "
        "policy.init_checkpoint");
  }
  if (cfg.rounds < 1) {
    throw ConfigError("rounds must be >= 1, got " + std::to_string(cfg.rounds));
  }
  if (cfg.teacher_mode == TeacherMode::kHttp &&
      cfg.teacher_http.endpoint_url.empty()) {
    throw ConfigError("teacher.mode is http but teacher.endpoint_url is unset");
  }
  cfg.rl.validate();
  cfg.sft.validate();
  if (cfg.teacher_mode == TeacherMode::kHttp) {
    cfg.teacher_http.validate();
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path,
                          const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() +
                      " is not valid JSON: " + e.what());
  }
  doc = apply_config_overrides(std::move(doc), overrides);
  return parse_run_config(doc, path.parent_path());
}

std::unique_ptr<Teacher> make_teacher(const RunConfig& cfg) {
  if (cfg.teacher_mode == TeacherMode::kScripted) {
    return std::make_unique<ScriptedTeacher>(cfg.seed);
  }
  return std::make_unique<HttpTeacher>(cfg.teacher_http);
}

Policy make_initial_policy(const RunConfig& cfg) {
  if (!cfg.init_checkpoint.empty()) {
    return load_checkpoint(cfg.init_checkpoint);
  }
  return make_uniform_policy(
      SentenceVocab::from_content_templates(cfg.vocab_templates));
}

}  // namespace ares
