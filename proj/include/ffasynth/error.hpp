#pragma once

#include <stdexcept>
#include <string>

namespace ffasynth {

/// Invalid argument, shape or configuration supplied by the caller.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable, missing or malformed input data (images, checkpoints, weight files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared during a forward pass, loss evaluation or update.
/// `where()` names the layer or loss term that produced it.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(std::string where, const std::string& what)
      : std::runtime_error(what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace ffasynth
