#pragma once

#include "prmix/grid.hpp"
#include "prmix/pr.hpp"

namespace prmix::defaults {

// Working defaults shared by the CLI and the simulation harness: uniform
// initial guess on [0,10] over 1001 points, weight exponent 0.67,
// 200 permutation replicates, 95% intervals.

inline constexpr double grid_lo = 0.0;
inline constexpr double grid_hi = 10.0;
inline constexpr Eigen::Index grid_points = 1001;
inline constexpr double weight_exponent = 0.67;
inline constexpr Eigen::Index permutations = 200;
inline constexpr double level = 0.95;

inline GridMeasure<double> grid() {
    return GridMeasure<double>::lebesgue(grid_lo, grid_hi, grid_points);
}

inline GridDensity<double> initial_guess(const GridMeasure<double>& g) {
    return GridDensity<double>::uniform(g);
}

inline WeightSchedule<double> schedule() { return WeightSchedule<double>(weight_exponent); }

} // namespace prmix::defaults
