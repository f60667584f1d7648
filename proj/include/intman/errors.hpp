#pragma once

#include <stdexcept>
#include <string>

namespace intman {

/// Malformed input: bad lane ids, invalid configuration values, unreadable files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SolveErrorKind { InfeasibleEntry, StateExplosion, TooLarge };

class SolveError : public std::runtime_error {
 public:
  SolveError(SolveErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  SolveErrorKind kind() const noexcept { return kind_; }

 private:
  SolveErrorKind kind_;
};

}  // namespace intman
