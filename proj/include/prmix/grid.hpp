#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>

namespace prmix {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using ArrayXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class MeasureKind { Lebesgue, Counting };

/// Mass-normalization tolerance used by GridDensity; scaled up for
/// low-precision scalars so the float instantiation stays usable.
template <typename Scalar>
constexpr Scalar mass_tolerance() {
    return std::numeric_limits<Scalar>::epsilon() > Scalar(1e-12) ? Scalar(1e-4)
                                                                  : Scalar(1e-10);
}

/// Discretized support of the mixing distribution together with its
/// dominating measure and quadrature weights. Immutable; copies share the
/// underlying storage, so passing by value and holding inside densities is
/// cheap and thread-safe.
///
/// Lebesgue grids are uniform with trapezoidal weights (h/2, h, ..., h, h/2);
/// counting grids carry externally supplied points with unit weights.
template <typename Scalar = double>
class GridMeasure {
public:
    /// Uniform grid on [a, b] with n points and trapezoidal weights.
    static GridMeasure lebesgue(Scalar a, Scalar b, Eigen::Index n) {
        if (!std::isfinite(static_cast<double>(a)) || !std::isfinite(static_cast<double>(b)))
            throw std::invalid_argument("GridMeasure: bounds must be finite");
        if (!(a < b)) throw std::invalid_argument("GridMeasure: need a < b");
        if (n < 2) throw std::invalid_argument("GridMeasure: lebesgue grid needs >= 2 points");

        const Scalar h = (b - a) / Scalar(n - 1);
        ArrayX<Scalar> pts = ArrayX<Scalar>::LinSpaced(n, a, b);
        pts(n - 1) = b; // pin the endpoint exactly
        ArrayX<Scalar> w = ArrayX<Scalar>::Constant(n, h);
        w(0) = h / Scalar(2);
        w(n - 1) = h / Scalar(2);
        return GridMeasure(MeasureKind::Lebesgue, std::move(pts), std::move(w), a, b);
    }

    /// Counting measure on the given strictly increasing points.
    static GridMeasure counting(ArrayX<Scalar> points) {
        const Eigen::Index n = points.size();
        if (n < 1) throw std::invalid_argument("GridMeasure: counting grid needs >= 1 point");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!std::isfinite(static_cast<double>(points(j))))
                throw std::invalid_argument("GridMeasure: points must be finite");
            if (j > 0 && !(points(j - 1) < points(j)))
                throw std::invalid_argument("GridMeasure: points must be strictly increasing");
        }
        const Scalar a = points(0);
        const Scalar b = points(n - 1);
        return GridMeasure(MeasureKind::Counting, std::move(points),
                           ArrayX<Scalar>::Ones(n), a, b);
    }

    MeasureKind kind() const { return impl_->kind; }
    Eigen::Index size() const { return impl_->points.size(); }
    const ArrayX<Scalar>& points() const { return impl_->points; }
    const ArrayX<Scalar>& quad_weights() const { return impl_->weights; }
    Scalar lower() const { return impl_->lower; }
    Scalar upper() const { return impl_->upper; }

    /// Spacing of a lebesgue grid.
    Scalar spacing() const {
        if (impl_->kind != MeasureKind::Lebesgue || size() < 2)
            throw std::logic_error("GridMeasure: spacing undefined for this grid");
        return (impl_->upper - impl_->lower) / Scalar(size() - 1);
    }

    /// Index of the grid point matching x within an absolute tolerance,
    /// or -1 when no point matches.
    Eigen::Index index_of(Scalar x, Scalar tol) const {
        const auto& p = impl_->points;
        Eigen::Index lo = 0, hi = p.size() - 1;
        while (lo < hi) { // first point >= x - tol
            const Eigen::Index mid = (lo + hi) / 2;
            if (p(mid) < x - tol)
                lo = mid + 1;
            else
                hi = mid;
        }
        return std::abs(static_cast<double>(p(lo) - x)) <= static_cast<double>(tol) ? lo : -1;
    }

    /// Grids compare equal when they share storage.
    bool same_as(const GridMeasure& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        MeasureKind kind;
        ArrayX<Scalar> points;
        ArrayX<Scalar> weights;
        Scalar lower, upper;
    };

    GridMeasure(MeasureKind kind, ArrayX<Scalar> pts, ArrayX<Scalar> w, Scalar lo, Scalar hi)
        : impl_(std::make_shared<const Impl>(
              Impl{kind, std::move(pts), std::move(w), lo, hi})) {}

    std::shared_ptr<const Impl> impl_;
};

/// make_grid(kind, a, b, n): convenience dispatcher for lebesgue grids.
/// Counting grids take their points externally; use GridMeasure::counting.
template <typename Scalar = double>
GridMeasure<Scalar> make_grid(MeasureKind kind, Scalar a, Scalar b, Eigen::Index n) {
    if (kind != MeasureKind::Lebesgue)
        throw std::invalid_argument("make_grid: counting grids need explicit points");
    return GridMeasure<Scalar>::lebesgue(a, b, n);
}

/// Quadrature of an arbitrary dense expression against the grid's weights.
template <typename Scalar, typename Derived>
Scalar integrate(const GridMeasure<Scalar>& grid, const Eigen::DenseBase<Derived>& values) {
    if (values.size() != grid.size())
        throw std::invalid_argument("integrate: length mismatch with grid");
    const ArrayX<Scalar> v = values.derived().array().template cast<Scalar>();
    if (!v.isFinite().all())
        throw std::invalid_argument("integrate: non-finite entry");
    return (grid.quad_weights() * v).sum();
}

/// Nonnegative values on a grid, normalized under the grid's measure.
/// Construction validates nonnegativity, finiteness, and unit mass.
template <typename Scalar = double>
class GridDensity {
public:
    GridDensity(GridMeasure<Scalar> grid, ArrayX<Scalar> values,
                Scalar tol = mass_tolerance<Scalar>())
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw std::invalid_argument("GridDensity: length mismatch with grid");
        if (!values_.isFinite().all())
            throw std::invalid_argument("GridDensity: non-finite value");
        if ((values_ < Scalar(0)).any())
            throw std::invalid_argument("GridDensity: negative value");
        const Scalar mass = (grid_.quad_weights() * values_).sum();
        if (std::abs(static_cast<double>(mass - Scalar(1))) > static_cast<double>(tol))
            throw std::invalid_argument("GridDensity: quadrature mass not 1");
    }

    /// Normalize arbitrary nonnegative raw values into a density.
    static GridDensity normalized(GridMeasure<Scalar> grid, ArrayX<Scalar> raw) {
        if (raw.size() != grid.size())
            throw std::invalid_argument("GridDensity: length mismatch with grid");
        if (!raw.isFinite().all() || (raw < Scalar(0)).any())
            throw std::invalid_argument("GridDensity: raw values must be finite and >= 0");
        const Scalar mass = (grid.quad_weights() * raw).sum();
        if (!(mass > Scalar(0)))
            throw std::invalid_argument("GridDensity: raw values have zero mass");
        return GridDensity(std::move(grid), (raw / mass).eval());
    }

    /// Uniform density over the grid's support (the default initial guess).
    static GridDensity uniform(GridMeasure<Scalar> grid) {
        ArrayX<Scalar> ones = ArrayX<Scalar>::Ones(grid.size());
        return normalized(std::move(grid), std::move(ones));
    }

    const GridMeasure<Scalar>& grid() const { return grid_; }
    const ArrayX<Scalar>& values() const { return values_; }
    Eigen::Index size() const { return values_.size(); }

private:
    GridMeasure<Scalar> grid_;
    ArrayX<Scalar> values_;
};

template <typename Scalar>
Scalar integrate(const GridDensity<Scalar>& p) {
    return integrate(p.grid(), p.values());
}

} // namespace prmix
