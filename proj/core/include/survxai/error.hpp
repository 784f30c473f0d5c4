#pragma once

#include <stdexcept>
#include <string>

namespace survxai {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/volume shapes that do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad arguments or configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  enum class Kind { open_failed, bad_magic, truncated, dim_overflow, parse, write_failed };

  IoError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A correlation was requested over a coordinate with zero variance.
class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

// Training or optimization produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage was run before the stage that produces its inputs.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(const std::string& what, std::string stage)
      : Error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace survxai
