#pragma once

#include <stdexcept>
#include <string>

namespace emoconv {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape, range, length mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but too small or empty to process.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Audio file missing, unreadable, or not decodable as PCM.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// A pluggable model backend is unknown or its weights are not available.
// Kept distinct from data errors so callers can mark a metric absent.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Checkpoint and runtime configuration disagree (backend id, dimensions, version).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class EmptyManifestError : public Error {
 public:
  using Error::Error;
};

// Training produced a NaN/Inf loss term. `term` names the offending component.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::string term, const std::string& detail)
      : Error("non-finite loss term '" + term + "': " + detail), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace emoconv
