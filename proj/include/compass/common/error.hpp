#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace compass {

// Base of every error the library raises. `code()` is a stable machine code
// used by the HTTP layer for error bodies and status mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& message)
      : Error("precondition_failed", message) {}
};

// Parse error in a text document, positioned by 1-based line/column.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error("parse_error", message + " at line " + std::to_string(line) + ", column " +
                                 std::to_string(column)),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what_failed, std::vector<std::string> violations)
      : Error("validation_failed", compose(what_failed, violations)),
        violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string compose(const std::string& what_failed,
                             const std::vector<std::string>& violations) {
    std::string out = what_failed;
    for (const auto& v : violations) {
      out += "\n  - ";
      out += v;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

// Converts a byte offset into a 1-based (line, column) pair.
struct TextPosition {
  std::size_t line = 1;
  std::size_t column = 1;
};
TextPosition position_of(std::string_view text, std::size_t offset);

}  // namespace compass
