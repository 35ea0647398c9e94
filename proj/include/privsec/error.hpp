#pragma once

#include <stdexcept>
#include <string>

namespace privsec {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or malformed input schema.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A computation was refused because it would exceed a configured budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, unsigned long long required,
                 unsigned long long allowed)
      : Error(what), required_(required), allowed_(allowed) {}
  unsigned long long required() const { return required_; }
  unsigned long long allowed() const { return allowed_; }

 private:
  unsigned long long required_;
  unsigned long long allowed_;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace privsec
