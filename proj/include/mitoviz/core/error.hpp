#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mitoviz {

struct FieldError {
  std::string field;
  std::string message;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a precondition. Maps to CLI exit code 2 and HTTP 422.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::vector<FieldError> fields = {})
      : Error(what), fields_(std::move(fields)) {}
  ValidationError(const std::string& field, const std::string& what)
      : Error(what), fields_{{field, what}} {}

  const std::vector<FieldError>& fields() const { return fields_; }

 private:
  std::vector<FieldError> fields_;
};

// File could not be read, written or decoded. CLI exit code 3.
class IoError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

}  // namespace mitoviz
