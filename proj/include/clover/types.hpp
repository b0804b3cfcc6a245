#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clover {

using ClassId = int;
using SeedId = std::size_t;

// Adversarial-label slot for seeds that have not produced a test case yet.
inline constexpr ClassId kNoLabel = -1;

enum class PNorm { kLinf, kL2 };

// Precondition or argument violation on a public entry point.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file content. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string to_string(PNorm norm);
PNorm parse_pnorm(const std::string& text);

}  // namespace clover
