#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ksc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Domain specification violates the nesting x_lo < omega' < omega < x_hi.
class InvalidDomain : public Error {
 public:
  using Error::Error;
};

/// Forward solver exceeded the blow-up guard.
class BlowUpDetected : public Error {
 public:
  BlowUpDetected(std::size_t time_index, double magnitude)
      : Error("blow-up detected at time index " + std::to_string(time_index) +
              " (|state| = " + std::to_string(magnitude) + ")"),
        time_index_(time_index),
        magnitude_(magnitude) {}

  std::size_t time_index() const noexcept { return time_index_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  std::size_t time_index_;
  double magnitude_;
};

/// A non-finite value appeared inside an iterative stage.
class NumericalFailure : public Error {
 public:
  NumericalFailure(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// All weighted right-hand sides vanished for a nonzero sample.
class DegenerateWeight : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iterate left the set K = {|eta| <= 1}.
class InvalidIterate : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string key, const std::string& what)
      : Error("line " + std::to_string(line) +
              (key.empty() ? std::string() : " (" + key + ")") + ": " + what),
        line_(line),
        key_(std::move(key)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

}  // namespace ksc
