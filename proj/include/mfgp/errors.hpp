#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfgp {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by caller-supplied data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A numerical routine could not produce a trustworthy answer.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

// The heterogeneous fixed-point iteration stopped contracting.
class DivergenceError : public SolverFailure {
 public:
  DivergenceError(const std::string& what, double impact_norm,
                  std::vector<double> residuals)
      : SolverFailure(what),
        impact_norm_(impact_norm),
        residuals_(std::move(residuals)) {}

  double impact_norm() const noexcept { return impact_norm_; }
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  double impact_norm_;
  std::vector<double> residuals_;
};

// Malformed external data (CSV, JSON). `line` is 1-based, 0 when unknown.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mfgp
