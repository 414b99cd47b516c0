#pragma once

#include <stdexcept>
#include <string>

namespace gffpin {

/// Invalid user input: bad dimensions, parameters, or configuration keys.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine failed: non-convergence, overflow, breached tolerance.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The moment generating function of the disorder diverges at the requested intensity.
class AssumptionViolation : public NumericalError {
 public:
  explicit AssumptionViolation(const std::string& what) : NumericalError(what) {}
};

/// Not enough statistics for an honest error bar (too few blocks, degenerate weights, rare events).
class StatisticsGuardError : public std::runtime_error {
 public:
  explicit StatisticsGuardError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gffpin
