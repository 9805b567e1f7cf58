#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace jointsched {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value that breaks one of its constraints.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, std::string constraint)
      : Error(field + ": " + constraint),
        field_(std::move(field)),
        constraint_(std::move(constraint)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string field_;
  std::string constraint_;
};

/// Equality constraints on shares are checked to this tolerance.
inline constexpr double kFeasibilityTol = 1e-9;
/// State probabilities must sum to one within this tolerance.
inline constexpr double kProbabilitySumTol = 1e-12;

}  // namespace jointsched
