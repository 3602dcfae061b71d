#pragma once

#include <stdexcept>
#include <string>

namespace reposim {

// Bad or inconsistent input files / config values.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unknown id passed to a lookup (cell, driver, ...).
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point outside the tessellated region.
struct OutOfRegionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given inputs (e.g. zero online hours).
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Episode aborted at run time (e.g. the reposition policy threw).
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace reposim
