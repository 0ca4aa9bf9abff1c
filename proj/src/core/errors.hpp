#pragma once

#include <stdexcept>
#include <string>

namespace msa {

// Error categories map 1:1 onto the C API / CLI exit codes.
enum class ErrorCode : int {
  ok = 0,
  usage = 2,
  validation = 3,
  numeric = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(ErrorCode::validation, msg) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(ErrorCode::validation, msg) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(ErrorCode::validation, msg) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& msg) : Error(ErrorCode::validation, msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(ErrorCode::numeric, msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(ErrorCode::io, msg) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(ErrorCode::usage, msg) {}
};

}  // namespace msa
