#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace contrasum {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied value; carries the offending field/key name.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Malformed persisted data; carries the 1-based line number when known.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  explicit SchemaError(const std::string& message) : Error(message), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Caller broke an API contract (mismatched lengths, misaligned ids, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input sequence exceeds the model's maximum length; never truncated silently.
class LengthError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Training hit a non-finite loss and stopped.
class TrainAbort : public Error {
 public:
  TrainAbort(int step, const std::string& sample_id, const std::string& message)
      : Error("step " + std::to_string(step) + ", sample " + sample_id + ": " + message),
        step_(step),
        sample_id_(sample_id) {}

  int step() const { return step_; }
  const std::string& sample_id() const { return sample_id_; }

 private:
  int step_;
  std::string sample_id_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace contrasum
