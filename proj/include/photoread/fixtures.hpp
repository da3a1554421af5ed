#pragma once

#include <string_view>

#include "photoread/count_model.hpp"

namespace photoread::fixtures {

/// Dark/bright laws tuned to a target histogram overlap.
struct Fixture {
  std::string_view name;
  SuperPoissonParams g;
  SuperPoissonParams f;
  double target_overlap;
};

/// Overlap 0.61, bright mean 3.1 (the 12.5 ms regime).
inline constexpr Fixture kOverlap061{"overlap-0.61", {0.8, 2.0}, {11.625, 3.75}, 0.61};
/// Overlap 0.72, bright mean 2.1 (the 6 ms regime).
inline constexpr Fixture kOverlap072{"overlap-0.72", {0.4, 2.0}, {2.73, 1.3}, 0.72};
/// Essentially separable (overlap ~ 3e-12), bright mean 138.8.
inline constexpr Fixture kSeparated{"separated", {2.0, 2.0}, {69.4, 0.5}, 0.0};

}  // namespace photoread::fixtures
