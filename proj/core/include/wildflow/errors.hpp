#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wildflow {

/// Precondition or shape violation in a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs that are individually valid but disagree with each other, e.g. a
/// checkpoint trained on a different feature dimension than the dataset.
class SchemaMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Malformed input file. Carries the location of the offending cell.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, std::size_t line, std::size_t column, const std::string& what);
  ParseError(std::string file, const std::string& what);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t line_ = 0;
  std::size_t column_ = 0;
};

/// Non-finite value encountered while training or integrating.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t step);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A metric that is not defined for the given inputs (e.g. AUPR with no positives).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A required file or model component is absent.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wildflow
