#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odenet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions of the operands do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Unknown names, out-of-range settings, malformed config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A time stepper produced a non-finite state.
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// An iterative solve stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (last residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The Neumann series was requested for an operator with spectral radius >= 1.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double spectral_radius)
      : Error(what), spectral_radius_(spectral_radius) {}

  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  double spectral_radius_;
};

/// Input text could not be parsed; line is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace odenet
