#pragma once

#include "prmix/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace prmix {

/// Scalar summary Psi(p) = integral of psi * p against the grid measure.
///
/// cdf_at(x0)      psi = indicator of (-inf, x0]; on lebesgue grids the mass
///                 up to x0 is the integral of the piecewise-linear density
///                 interpolant, so values strictly between grid points do not
///                 staircase. Counting grids sum the points <= x0.
/// density_at(x0)  value of p at the grid point matching x0 (no interpolation;
///                 x0 must lie on the grid).
/// mean            psi(x) = x.
/// custom(v)       psi given by one finite value per grid point.
template <typename Scalar = double>
class Functional {
public:
    enum class Tag { CdfAt, DensityAt, Mean, Custom };

    static Functional cdf_at(Scalar x0) {
        if (!std::isfinite(static_cast<double>(x0)))
            throw std::invalid_argument("Functional: cdf_at needs finite x0");
        Functional f(Tag::CdfAt);
        f.x0_ = x0;
        return f;
    }

    static Functional density_at(Scalar x0) {
        if (!std::isfinite(static_cast<double>(x0)))
            throw std::invalid_argument("Functional: density_at needs finite x0");
        Functional f(Tag::DensityAt);
        f.x0_ = x0;
        return f;
    }

    static Functional mean() { return Functional(Tag::Mean); }

    static Functional custom(ArrayX<Scalar> values) {
        if (!values.isFinite().all())
            throw std::invalid_argument("Functional: custom values must be finite");
        Functional f(Tag::Custom);
        f.values_ = std::move(values);
        return f;
    }

    Tag tag() const { return tag_; }
    Scalar location() const { return x0_; }
    const ArrayX<Scalar>& custom_values() const { return values_; }

private:
    explicit Functional(Tag t) : tag_(t) {}

    Tag tag_;
    Scalar x0_ = Scalar(0);
    ArrayX<Scalar> values_;
};

namespace detail {

/// Tolerance for matching a functional location to a grid point.
template <typename Scalar>
Scalar grid_match_tol(const GridMeasure<Scalar>& grid) {
    const Scalar span = grid.upper() - grid.lower();
    return std::max(span, Scalar(1)) * Scalar(1e-9);
}

/// CDF at x0 of the density described by (grid, values). Lebesgue grids
/// integrate the piecewise-linear interpolant up to x0.
template <typename Scalar>
Scalar cdf_on_values(const GridMeasure<Scalar>& grid, const ArrayX<Scalar>& v, Scalar x0) {
    const ArrayX<Scalar>& x = grid.points();
    const Eigen::Index g = grid.size();
    if (grid.kind() == MeasureKind::Counting) {
        Scalar s = Scalar(0);
        for (Eigen::Index j = 0; j < g && x(j) <= x0; ++j) s += v(j);
        return s;
    }
    if (x0 >= grid.upper()) return (grid.quad_weights() * v).sum();
    if (x0 < grid.lower()) return Scalar(0);
    const Scalar h = grid.spacing();
    Scalar acc = Scalar(0);
    Eigen::Index j = 0;
    while (j + 1 < g && x(j + 1) <= x0) {
        acc += h * (v(j) + v(j + 1)) / Scalar(2);
        ++j;
    }
    const Scalar t = x0 - x(j); // partial cell [x_j, x0]
    if (t > Scalar(0) && j + 1 < g) {
        const Scalar v_at = v(j) + (v(j + 1) - v(j)) * (t / h);
        acc += t * (v(j) + v_at) / Scalar(2);
    }
    return acc;
}

/// Functional value on raw density values, shared by the ensemble hot path.
template <typename Scalar>
Scalar apply_on_values(const Functional<Scalar>& psi, const GridMeasure<Scalar>& grid,
                       const ArrayX<Scalar>& v) {
    switch (psi.tag()) {
        case Functional<Scalar>::Tag::CdfAt:
            return cdf_on_values(grid, v, psi.location());
        case Functional<Scalar>::Tag::DensityAt: {
            const Eigen::Index j = grid.index_of(psi.location(), grid_match_tol(grid));
            if (j < 0)
                throw std::invalid_argument("Functional: density_at location not on grid");
            return v(j);
        }
        case Functional<Scalar>::Tag::Mean:
            return (grid.quad_weights() * grid.points() * v).sum();
        case Functional<Scalar>::Tag::Custom: {
            if (psi.custom_values().size() != grid.size())
                throw std::invalid_argument("Functional: custom values length mismatch");
            return (grid.quad_weights() * psi.custom_values() * v).sum();
        }
    }
    return Scalar(0); // unreachable
}

} // namespace detail

template <typename Scalar>
Scalar apply_functional(const Functional<Scalar>& psi, const GridDensity<Scalar>& p) {
    return detail::apply_on_values(psi, p.grid(), p.values());
}

} // namespace prmix
