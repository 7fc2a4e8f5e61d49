#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace driftlab {

// A scalar policy was applied to a game whose symbol count is not 2.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An input lies outside the domain an operation is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The requested initialization has no closed-form solution here
// (multitask flows with unequal instructor initializations).
class UnsupportedInitialization : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unknown preset, variant or unit name.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid experiment or training configuration. `key` names the offending
// config field when known; `line` is 1-based when the error could be
// attributed to a line of a config file, 0 otherwise.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0, std::string key = {})
      : std::runtime_error(what), line_(line), key_(std::move(key)) {}
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

}  // namespace driftlab
