#include "salm/error.hpp"

namespace salm {

namespace {
std::string with_line(std::size_t line, const std::string& what) {
  if (line == 0) return what;
  return "line " + std::to_string(line) + ": " + what;
}
}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error(with_line(line, what)), line_(line) {}

ValidationError::ValidationError(std::size_t line, const std::string& what)
    : Error(with_line(line, what)), line_(line) {}

}  // namespace salm
