#pragma once

#include <stdexcept>
#include <string>

namespace pumpshape {

/// Invalid numeric input (non-positive length, zero denominator, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Index, window or coordinate outside the computed plane.
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Grids that must be congruent are not.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation not allowed in the object's current state.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Inconsistent or malformed scenario configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Short machine-readable tag for the error kind, used by the CLI error JSON.
inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
  if (dynamic_cast<const RangeError*>(&e)) return "range_error";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape_error";
  if (dynamic_cast<const StateError*>(&e)) return "state_error";
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  return "error";
}

}  // namespace pumpshape
