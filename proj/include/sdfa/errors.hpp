#pragma once

#include <stdexcept>
#include <string>

namespace sdfa {

// Stable process/C-API status contract.
enum class ErrorKind : int {
  kValidation = 1,
  kIo = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, "validation error: " + what) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& what) : Error(ErrorKind::kValidation, "argument error: " + what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kValidation, "shape error: " + what) {}
};

struct StateError : Error {
  explicit StateError(const std::string& what) : Error(ErrorKind::kValidation, "state error: " + what) {}
};

struct EmptyGroupError : Error {
  explicit EmptyGroupError(int group)
      : Error(ErrorKind::kValidation, "empty-group error: group " + std::to_string(group) + " has no members"),
        group_index(group) {}
  int group_index;
};

struct LoadError : Error {
  explicit LoadError(const std::string& what) : Error(ErrorKind::kIo, "load error: " + what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, "io error: " + what) {}
};

// Non-finite values during optimization. `term` names the offending loss term.
struct TrainingError : Error {
  TrainingError(const std::string& term_name, const std::string& what)
      : Error(ErrorKind::kNumeric, "training error [" + term_name + "]: " + what), term(term_name) {}
  std::string term;
};

}  // namespace sdfa
