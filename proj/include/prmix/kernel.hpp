#pragma once

#include "prmix/grid.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

namespace prmix {

namespace detail {
template <typename Scalar>
ArrayX<Scalar> lgamma_array(const ArrayX<Scalar>& a) {
    ArrayX<Scalar> out(a.size());
    for (Eigen::Index j = 0; j < a.size(); ++j)
        out(j) = Scalar(std::lgamma(static_cast<double>(a(j))));
    return out;
}
} // namespace detail

/// Known sampling kernel k(y | x): for every x in the mixing space,
/// y -> k(y | x) is a probability density on the observation space.
///
/// Families:
///   normal(scale)                 N(y | x, scale^2), scale = standard deviation
///   scaled_t(df, scale)           (1/scale) * t_df((y - x) / scale)
///   gamma_shape_rate(mult, rate)  Gamma(y | shape mult*x, rate); needs y > 0 and
///                                 x >= 0, where x = 0 is the shape -> 0 limit
///   custom(f)                     arbitrary pointwise density f(y, x)
template <typename Scalar = double>
class KernelFamily {
public:
    enum class Tag { Normal, ScaledT, GammaShapeRate, Custom };

    static KernelFamily normal(Scalar scale) {
        if (!(scale > Scalar(0))) throw std::invalid_argument("KernelFamily: scale must be > 0");
        KernelFamily k(Tag::Normal);
        k.a_ = scale;
        return k;
    }

    static KernelFamily scaled_t(Scalar df, Scalar scale) {
        if (!(df > Scalar(0))) throw std::invalid_argument("KernelFamily: df must be > 0");
        if (!(scale > Scalar(0))) throw std::invalid_argument("KernelFamily: scale must be > 0");
        KernelFamily k(Tag::ScaledT);
        k.a_ = df;
        k.b_ = scale;
        return k;
    }

    static KernelFamily gamma_shape_rate(Scalar shape_mult, Scalar rate) {
        if (!(shape_mult > Scalar(0)))
            throw std::invalid_argument("KernelFamily: shape multiplier must be > 0");
        if (!(rate > Scalar(0))) throw std::invalid_argument("KernelFamily: rate must be > 0");
        KernelFamily k(Tag::GammaShapeRate);
        k.a_ = shape_mult;
        k.b_ = rate;
        return k;
    }

    static KernelFamily custom(std::function<Scalar(Scalar y, Scalar x)> density) {
        if (!density) throw std::invalid_argument("KernelFamily: null custom density");
        KernelFamily k(Tag::Custom);
        k.fn_ = std::move(density);
        return k;
    }

    Tag tag() const { return tag_; }
    Scalar scale() const { return tag_ == Tag::ScaledT ? b_ : a_; }
    Scalar df() const { return a_; }
    Scalar shape_mult() const { return a_; }
    Scalar rate() const { return b_; }

    bool in_support(Scalar y) const {
        if (!std::isfinite(static_cast<double>(y))) return false;
        return tag_ != Tag::GammaShapeRate || y > Scalar(0);
    }

    /// Pointwise density k(y | x).
    Scalar operator()(Scalar y, Scalar x) const {
        switch (tag_) {
            case Tag::Normal: {
                const Scalar z = (y - x) / a_;
                return std::exp(Scalar(-0.5) * z * z) / (a_ * sqrt_two_pi());
            }
            case Tag::ScaledT: {
                const Scalar z = (y - x) / b_;
                const Scalar df = a_;
                const Scalar c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) /
                                 std::sqrt(df * pi());
                return (c / b_) * std::pow(Scalar(1) + z * z / df, -(df + 1) / 2);
            }
            case Tag::GammaShapeRate: {
                check_gamma_domain(y, x);
                if (x == Scalar(0)) return Scalar(0); // shape -> 0 limit for y > 0
                const Scalar shape = a_ * x;
                return std::exp(shape * std::log(b_) - std::lgamma(shape) +
                                (shape - 1) * std::log(y) - b_ * y);
            }
            case Tag::Custom:
                return fn_(y, x);
        }
        return Scalar(0); // unreachable
    }

    /// k(y | x_j) across the whole grid, vectorized per family.
    ArrayX<Scalar> column(Scalar y, const GridMeasure<Scalar>& grid) const {
        if (!std::isfinite(static_cast<double>(y)))
            throw std::invalid_argument("KernelFamily: observation must be finite");
        const ArrayX<Scalar>& x = grid.points();
        switch (tag_) {
            case Tag::Normal: {
                const ArrayX<Scalar> z = (y - x) / a_;
                return (Scalar(-0.5) * z.square()).exp() / (a_ * sqrt_two_pi());
            }
            case Tag::ScaledT: {
                const Scalar df = a_;
                const Scalar c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) /
                                 (std::sqrt(df * pi()) * b_);
                const ArrayX<Scalar> z = (y - x) / b_;
                return c * (Scalar(1) + z.square() / df).pow(-(df + 1) / 2);
            }
            case Tag::GammaShapeRate: {
                if (!(y > Scalar(0)))
                    throw std::domain_error("KernelFamily: gamma kernel needs y > 0");
                if (!(x.minCoeff() >= Scalar(0)))
                    throw std::domain_error("KernelFamily: gamma kernel needs grid x >= 0");
                const ArrayX<Scalar> shape = a_ * x;
                const ArrayX<Scalar> log_norm =
                    shape * std::log(b_) - detail::lgamma_array(shape); // cacheable per grid
                const Scalar log_y = std::log(y);
                // x = 0 is the shape -> 0 limit (point mass at zero): density 0
                // for y > 0; masked explicitly because vectorized exp clamps -inf
                return (shape > Scalar(0))
                    .select((log_norm + (shape - 1) * log_y - b_ * y).exp(), Scalar(0));
            }
            case Tag::Custom: {
                ArrayX<Scalar> out(x.size());
                for (Eigen::Index j = 0; j < x.size(); ++j) out(j) = fn_(y, x(j));
                if (!out.isFinite().all() || (out < Scalar(0)).any())
                    throw std::domain_error("KernelFamily: custom density not finite nonnegative");
                return out;
            }
        }
        return ArrayX<Scalar>(); // unreachable
    }

private:
    explicit KernelFamily(Tag t) : tag_(t) {}

    static Scalar pi() { return Scalar(3.141592653589793238462643383279502884L); }
    static Scalar sqrt_two_pi() {
        return Scalar(2.506628274631000502415765284811045253L);
    }

    void check_gamma_domain(Scalar y, Scalar x) const {
        if (!(y > Scalar(0))) throw std::domain_error("KernelFamily: gamma kernel needs y > 0");
        if (!(x >= Scalar(0)))
            throw std::domain_error("KernelFamily: gamma kernel needs x >= 0");
    }

    Tag tag_;
    Scalar a_ = Scalar(0);
    Scalar b_ = Scalar(0);
    std::function<Scalar(Scalar, Scalar)> fn_;
};

template <typename Scalar>
ArrayX<Scalar> kernel_column(const KernelFamily<Scalar>& k, Scalar y,
                             const GridMeasure<Scalar>& grid) {
    return k.column(y, grid);
}

/// Dense n x G matrix with row i = k(y_i | .). Precomputing it lets every
/// permutation replay of the same dataset reuse the kernel evaluations.
template <typename Scalar>
ArrayXX<Scalar> kernel_matrix(const KernelFamily<Scalar>& k, const ArrayX<Scalar>& data,
                              const GridMeasure<Scalar>& grid) {
    const Eigen::Index n = data.size();
    const Eigen::Index g = grid.size();
    ArrayXX<Scalar> m(n, g);
    if (k.tag() == KernelFamily<Scalar>::Tag::GammaShapeRate) {
        // hoist the per-grid constants out of the per-observation loop
        if (!(grid.points().minCoeff() >= Scalar(0)))
            throw std::domain_error("kernel_matrix: gamma kernel needs grid x >= 0");
        const ArrayX<Scalar> shape = k.shape_mult() * grid.points();
        const ArrayX<Scalar> log_norm = shape * std::log(k.rate()) - detail::lgamma_array(shape);
        const ArrayX<Scalar> shape_m1 = shape - Scalar(1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Scalar y = data(i);
            if (!(y > Scalar(0)))
                throw std::domain_error("kernel_matrix: gamma kernel needs y > 0 at row " +
                                        std::to_string(i));
            m.row(i) = (shape > Scalar(0))
                           .select((log_norm + shape_m1 * std::log(y) - k.rate() * y).exp(),
                                   Scalar(0))
                           .transpose();
        }
        return m;
    }
    for (Eigen::Index i = 0; i < n; ++i) m.row(i) = k.column(data(i), grid).transpose();
    return m;
}

} // namespace prmix
