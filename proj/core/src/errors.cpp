#include "wildflow/errors.hpp"

#include <utility>

namespace wildflow {

ParseError::ParseError(std::string file, std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      file_(std::move(file)),
      line_(line),
      column_(column) {}

ParseError::ParseError(std::string file, const std::string& what)
    : std::runtime_error(file + ": " + what), file_(std::move(file)) {}

NumericError::NumericError(const std::string& what, std::size_t step)
    : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

}  // namespace wildflow
