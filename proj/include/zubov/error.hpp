#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace zubov {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position` is 1-based; one past the end of the
/// input for truncated expressions.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Arithmetic left the real domain (ln of nonpositive, sqrt of negative,
/// division by zero, non-finite result).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Configuration or schema problem. Carries every problem found, not just the
/// first one.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  explicit ConfigError(const std::string& problem) : ConfigError(std::vector<std::string>{problem}) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

/// Exhaustive enumeration would exceed the configured schedule budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Trajectory integration produced a non-finite state.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace zubov
