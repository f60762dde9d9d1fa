#pragma once

#include "prmix/errors.hpp"
#include "prmix/grid.hpp"
#include "prmix/kernel.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prmix {

/// Step sizes w_i = (i+1)^{-gamma}. The exponent is restricted to (0.5, 1],
/// which makes the weight sum diverge while the sum of squares converges —
/// the regime in which the recursion is consistent.
template <typename Scalar = double>
class WeightSchedule {
public:
    explicit WeightSchedule(Scalar exponent = Scalar(0.67)) : gamma_(exponent) {
        if (!(exponent > Scalar(0.5)) || !(exponent <= Scalar(1)))
            throw std::invalid_argument("WeightSchedule: exponent must lie in (0.5, 1]");
    }

    Scalar exponent() const { return gamma_; }

    Scalar operator()(Eigen::Index i) const {
        if (i < 1) throw std::invalid_argument("WeightSchedule: step index must be >= 1");
        return std::pow(Scalar(i + 1), -gamma_);
    }

private:
    Scalar gamma_;
};

template <typename Scalar>
Scalar weight(const WeightSchedule<Scalar>& schedule, Eigen::Index i) {
    return schedule(i);
}

/// Result of one pass of the recursion over an ordered data sequence.
template <typename Scalar = double>
struct PrRun {
    GridDensity<Scalar> density;           ///< p_n
    ArrayX<Scalar> log_predictive;         ///< log f_{i-1}(Y_i), i = 1..n
    KernelFamily<Scalar> kernel;
    WeightSchedule<Scalar> schedule;
    std::vector<Eigen::Index> data_order;  ///< 0-based permutation actually used
};

namespace detail {

inline constexpr double predictive_floor = 1e-300;

/// In-place recursion update. `work` and `v` are caller-owned buffers so the
/// ensemble path allocates nothing per step. Returns the predictive value
/// f_{i-1}(y), computed with the same quadrature weights that define density
/// mass, which is what makes each step conserve mass at floating-point level.
template <typename Scalar, typename ColumnExpr>
Scalar pr_update_inplace(ArrayX<Scalar>& v, const ColumnExpr& column, Scalar w,
                         const GridMeasure<Scalar>& grid, ArrayX<Scalar>& work,
                         Eigen::Index step_one_based, Scalar y) {
    work = column * v; // k(y|.) p(.)
    const Scalar predictive = (grid.quad_weights() * work).sum();
    if (!(predictive > Scalar(predictive_floor)))
        throw DegeneratePredictiveError(
            "predictive recursion: degenerate predictive value at step " +
                std::to_string(step_one_based),
            step_one_based, static_cast<double>(y));
    v = (Scalar(1) - w) * v + (w / predictive) * work;
    return predictive;
}

/// Shared fold over an ordered sequence of kernel columns.
/// `column_of(i)` must yield the column for the i-th processed observation
/// (0-based, already permuted); `y_of(i)` only feeds error reporting.
template <typename Scalar, typename ColumnOf, typename YOf>
std::pair<ArrayX<Scalar>, ArrayX<Scalar>> pr_fold(Eigen::Index n, ColumnOf&& column_of,
                                                  YOf&& y_of, const GridDensity<Scalar>& p0,
                                                  const WeightSchedule<Scalar>& schedule) {
    const GridMeasure<Scalar>& grid = p0.grid();
    ArrayX<Scalar> v = p0.values();
    ArrayX<Scalar> work(grid.size());
    ArrayX<Scalar> log_pred(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar w = schedule(i + 1);
        const Scalar f =
            pr_update_inplace(v, column_of(i), w, grid, work, i + 1, y_of(i));
        log_pred(i) = std::log(f);
    }
    return {std::move(v), std::move(log_pred)};
}

template <typename Scalar>
void check_permutation(const std::vector<Eigen::Index>& perm, Eigen::Index n) {
    if (static_cast<Eigen::Index>(perm.size()) != n)
        throw std::invalid_argument("permutation: wrong length");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const Eigen::Index idx : perm) {
        if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)])
            throw std::invalid_argument("permutation: not a bijection");
        seen[static_cast<std::size_t>(idx)] = true;
    }
}

} // namespace detail

/// Single recursion step: p_new = (1-w) p_prev + w k(y|.) p_prev / f.
template <typename Scalar>
std::pair<GridDensity<Scalar>, Scalar> pr_step(const GridDensity<Scalar>& p_prev, Scalar y,
                                               Scalar w, const KernelFamily<Scalar>& k) {
    if (!(w > Scalar(0)) || !(w < Scalar(1)))
        throw std::invalid_argument("pr_step: weight must lie in (0, 1)");
    if (!k.in_support(y)) throw std::domain_error("pr_step: observation outside kernel support");
    const GridMeasure<Scalar>& grid = p_prev.grid();
    ArrayX<Scalar> v = p_prev.values();
    ArrayX<Scalar> work(grid.size());
    const ArrayX<Scalar> column = k.column(y, grid);
    const Scalar f = detail::pr_update_inplace(v, column, w, grid, work, 0, y);
    return {GridDensity<Scalar>(grid, std::move(v)), f};
}

/// Full recursion over the data in the given order.
template <typename Scalar>
PrRun<Scalar> pr_run(const ArrayX<Scalar>& data, const GridDensity<Scalar>& p0,
                     const WeightSchedule<Scalar>& schedule, const KernelFamily<Scalar>& k) {
    const Eigen::Index n = data.size();
    if (n < 1) throw std::invalid_argument("pr_run: data must be nonempty");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!k.in_support(data(i)))
            throw std::domain_error("pr_run: observation outside kernel support at index " +
                                    std::to_string(i));
    const GridMeasure<Scalar>& grid = p0.grid();
    ArrayX<Scalar> column(grid.size());
    auto [v, log_pred] = detail::pr_fold(
        n,
        [&](Eigen::Index i) -> const ArrayX<Scalar>& {
            column = k.column(data(i), grid);
            return column;
        },
        [&](Eigen::Index i) { return data(i); }, p0, schedule);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    return PrRun<Scalar>{GridDensity<Scalar>(grid, std::move(v)), std::move(log_pred), k,
                         schedule, std::move(order)};
}

/// Recursion over data reordered by `perm`: step i processes data[perm[i]].
template <typename Scalar>
PrRun<Scalar> pr_run_permuted(const ArrayX<Scalar>& data, const std::vector<Eigen::Index>& perm,
                              const GridDensity<Scalar>& p0,
                              const WeightSchedule<Scalar>& schedule,
                              const KernelFamily<Scalar>& k) {
    const Eigen::Index n = data.size();
    if (n < 1) throw std::invalid_argument("pr_run_permuted: data must be nonempty");
    detail::check_permutation<Scalar>(perm, n);
    ArrayX<Scalar> reordered(n);
    for (Eigen::Index i = 0; i < n; ++i) reordered(i) = data(perm[static_cast<std::size_t>(i)]);
    PrRun<Scalar> run = pr_run(reordered, p0, schedule, k);
    run.data_order = perm;
    return run;
}

} // namespace prmix
