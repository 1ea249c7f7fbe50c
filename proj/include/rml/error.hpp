#pragma once

#include <stdexcept>
#include <string>

namespace rml {

// Every error carries "module/operation" so the CLI can report where a run died.
class Error : public std::runtime_error {
 public:
  Error(std::string where, const std::string& what);
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class SolverError : public NumericError {
 public:
  SolverError(std::string where, const std::string& what, double residual);
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class StiffnessError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularKernelError : public NumericError {
 public:
  using NumericError::NumericError;
};

class StepSizeError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace rml
