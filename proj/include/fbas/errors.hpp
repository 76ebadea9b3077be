#pragma once

#include <stdexcept>
#include <string>

namespace fbas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  /// Stable machine-readable category, used by the CLI error JSON.
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_parameter"; }
};

/// Objective vector without a strictly negative inventory-risk coordinate.
class DegenerateObjective : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate_objective"; }
};

class InfeasibleState : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "infeasible_state"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t line, std::string column = {})
      : Error(what), line_(line), column_(std::move(column)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }
  const char* kind() const noexcept override { return "ingestion_error"; }

 private:
  std::size_t line_;
  std::string column_;
};

class SimulationIntegrityError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "simulation_integrity"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io_error"; }
};

}  // namespace fbas
