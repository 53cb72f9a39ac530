#pragma once

#include <stdexcept>
#include <string>

namespace swat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate an operation's preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A window-based computation was asked for an output whose receptive field
/// is not fully contained in the supplied tokens. Nothing is padded.
class BoundaryError : public Error {
 public:
  BoundaryError(const std::string& what, long missing_left, long missing_right)
      : Error(what + " (missing " + std::to_string(missing_left) + " token(s) on the left, " +
              std::to_string(missing_right) + " on the right)"),
        missing_left_(missing_left),
        missing_right_(missing_right) {}

  long missing_left() const noexcept { return missing_left_; }
  long missing_right() const noexcept { return missing_right_; }

 private:
  long missing_left_;
  long missing_right_;
};

/// Input violates a strictness assumption (e.g. tied importance scores).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// An enumeration or computation would exceed its configured budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Randomized construction did not succeed within its retry budget.
class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, double success_rate)
      : Error(what), success_rate_(success_rate) {}
  double success_rate() const noexcept { return success_rate_; }

 private:
  double success_rate_;
};

/// A lemma was invoked outside its hypotheses (e.g. B < 1).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Gradient training produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace swat
