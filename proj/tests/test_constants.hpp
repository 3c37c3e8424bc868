#pragma once

namespace testing {

inline constexpr int kProxCases = 1000;
inline constexpr int kRegularityGrid = 2000;
inline constexpr int kRepeats = 20;
inline constexpr int kAcceptanceMaxIter = 5000;
// Solver default.
inline constexpr double kAcceptanceTol = 1e-7;
// Agreement with the grid oracle at a knot.
inline constexpr double kKnotTol = 1e-3;

}  // namespace testing
