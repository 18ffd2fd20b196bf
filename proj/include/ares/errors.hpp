#pragma once

#include <stdexcept>
#include <string>

namespace ares {

// Base class for all errors raised by the library.  Every subclass message
// names the offending value (sentence text, file path, status code, ...) so
// failures in long runs can be diagnosed from the log alone.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Corpus file / schema problems (bad JSONL line, duplicate id, bad index).
class CorpusError : public Error {
 public:
  using Error::Error;
};

// Teacher response text that cannot be interpreted (no JSON object, missing
// sentence key, score off the 0.1 grid, verdict that is neither A nor B).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Teacher transport / contract failures: HTTP errors after retries are
// exhausted, missing credentials, or a scripted teacher asked about a
// problem with no gold rationale.
class TeacherError : public Error {
 public:
  using Error::Error;
};

// Sentence text not present in the vocabulary, or a params/vocab hash
// mismatch.
class VocabError : public Error {
 public:
  using Error::Error;
};

// Unreadable, corrupt, or incompatible checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (unknown key, wrong type, missing required field).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss) or a stage cannot make progress.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Evaluation cannot proceed (incompatible policies, no judgeable pairs).
class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ares
