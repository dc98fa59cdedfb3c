#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace modad {

// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or preconditions (ranges, empty inputs, sizes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Dimension disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Iterative solver reached its cap; carries the final KKT violation.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double violation)
      : Error(what), violation_(violation) {}
  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

}  // namespace modad
