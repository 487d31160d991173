#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbbm {

/// Invalid argument to a model or estimator operation.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configured resource budget (node cap, pairwise cap) would be exceeded.
/// This is a resource limit, never a statement about the model.
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An object is missing state the operation needs (e.g. paths not retained).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A statistical fit could not be carried out on the given data.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling gave up before accepting a sample.
class RejectionExhaustedError : public std::runtime_error {
 public:
  RejectionExhaustedError(const std::string& what, std::size_t attempts)
      : std::runtime_error(what), attempts_(attempts) {}
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

}  // namespace cbbm
