#pragma once

#include "prmix/functional.hpp"
#include "prmix/kernel.hpp"
#include "prmix/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prmix {

namespace detail {

/// Composite Simpson rule with `intervals` (forced even) subdivisions.
template <typename F>
double simpson(F&& f, double a, double b, int intervals) {
    if (intervals < 2) intervals = 2;
    if (intervals % 2) ++intervals;
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * 2.506628274631000502);
}

} // namespace detail

/// Closed-form moments of an observation sampler, derived from the
/// hierarchical representation (signal moments by quadrature over the
/// truncated mixing density, conditional noise moments in closed form).
struct ObservationMoments {
    double mean;
    double variance;
    double fourth_central; ///< for the standard error of a sample variance
};

/// One of the benchmark mixtures: kernel a in {1,2,3} crossed with mixing
/// density b in {1,2,3}, supported on [0,10].
///
///   Kernel 1   N(y | x, 0.5^2)
///   Kernel 2   (1/0.3) t_5((y - x)/0.3)
///   Kernel 3   Gamma(y | shape 20x, rate 20)
///   Mixing 1   (1/10) Beta(x/10 | 5, 5)
///   Mixing 2   0.75 N(3, 0.8^2) + 0.25 N(7, 0.8^2)
///   Mixing 3   Gamma(shape 2, rate 1)
///
/// Mixing densities 2 and 3 carry a little mass outside [0,10]; the sampler
/// rejects signals into [0,10] (and above 1e-6 under kernel 3, keeping the
/// gamma shape parameter away from 0), and the true-density oracle
/// renormalizes over [0,10] to match what the estimator can converge to.
class ExampleModel {
public:
    static constexpr double support_lo = 0.0;
    static constexpr double support_hi = 10.0;

    static ExampleModel make(int kernel_id, int mixing_id) {
        if (kernel_id < 1 || kernel_id > 3 || mixing_id < 1 || mixing_id > 3)
            throw std::invalid_argument("ExampleModel: ids must lie in 1..3");
        return ExampleModel(kernel_id, mixing_id);
    }

    /// Parses "a-b" (e.g. "3-3").
    static ExampleModel parse(const std::string& id) {
        if (id.size() != 3 || id[1] != '-')
            throw std::invalid_argument("ExampleModel: expected id of the form a-b");
        return make(id[0] - '0', id[2] - '0');
    }

    int kernel_id() const { return kernel_id_; }
    int mixing_id() const { return mixing_id_; }
    std::string name() const {
        return std::to_string(kernel_id_) + "-" + std::to_string(mixing_id_);
    }

    const KernelFamily<double>& kernel() const { return kernel_; }

    /// True mixing density at x, renormalized over [0,10].
    double mixing_density(double x) const {
        if (x < support_lo || x > support_hi) return 0.0;
        return raw_mixing_pdf(x) / truncation_mass_;
    }

    /// One latent signal draw, rejected into the admissible range.
    double sample_signal(Rng& rng) const {
        const double lo = signal_floor();
        for (;;) {
            double x = 0.0;
            switch (mixing_id_) {
                case 1: x = 10.0 * rng.beta(5.0, 5.0); break;
                case 2:
                    x = (rng.uniform() < 0.75 ? 3.0 : 7.0) + 0.8 * rng.normal();
                    break;
                default: x = rng.gamma(2.0, 1.0); break;
            }
            if (x >= lo && x <= support_hi) return x;
        }
    }

    /// One observation draw given the signal.
    double sample_observation(double x, Rng& rng) const {
        switch (kernel_id_) {
            case 1: return x + 0.5 * rng.normal();
            case 2: return x + 0.3 * rng.student_t(5.0);
            default: return rng.gamma(20.0 * x, 20.0);
        }
    }

    double signal_floor() const { return kernel_id_ == 3 ? 1e-6 : support_lo; }

    double truncation_mass() const { return truncation_mass_; }

private:
    ExampleModel(int kernel_id, int mixing_id)
        : kernel_id_(kernel_id),
          mixing_id_(mixing_id),
          kernel_(make_kernel(kernel_id)),
          truncation_mass_(detail::simpson([this](double x) { return raw_mixing_pdf(x); },
                                           support_lo, support_hi, oracle_intervals)) {}

    static KernelFamily<double> make_kernel(int id) {
        switch (id) {
            case 1: return KernelFamily<double>::normal(0.5);
            case 2: return KernelFamily<double>::scaled_t(5.0, 0.3);
            default: return KernelFamily<double>::gamma_shape_rate(20.0, 20.0);
        }
    }

    double raw_mixing_pdf(double x) const {
        switch (mixing_id_) {
            case 1: {
                const double u = x / 10.0;
                // Beta(5,5): 1/B(5,5) = 630
                return 630.0 * std::pow(u * (1.0 - u), 4.0) / 10.0;
            }
            case 2:
                return 0.75 * detail::normal_pdf(x, 3.0, 0.8) +
                       0.25 * detail::normal_pdf(x, 7.0, 0.8);
            default:
                return x > 0.0 ? x * std::exp(-x) : 0.0;
        }
    }

    // 20x the default working-grid resolution
    static constexpr int oracle_intervals = 20000;

    int kernel_id_;
    int mixing_id_;
    KernelFamily<double> kernel_;
    double truncation_mass_;

    friend ObservationMoments true_observation_moments(const ExampleModel&);
    friend ObservationMoments true_signal_moments(const ExampleModel&);
    friend double true_functional(const ExampleModel&, const Functional<double>&);
};

/// Draws n observations from the mixture: X from the mixing density, then
/// Y from k(. | X). Deterministic given the generator state.
inline ArrayX<double> sample_mixture(const ExampleModel& model, Eigen::Index n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_mixture: n must be >= 1");
    ArrayX<double> y(n);
    for (Eigen::Index i = 0; i < n; ++i)
        y(i) = model.sample_observation(model.sample_signal(rng), rng);
    return y;
}

/// True value of the functional under the (truncated) mixing distribution,
/// by closed-form density evaluation plus high-resolution quadrature.
inline double true_functional(const ExampleModel& model, const Functional<double>& psi) {
    const auto q = [&](double x) { return model.mixing_density(x); };
    const double a = ExampleModel::support_lo;
    const double b = ExampleModel::support_hi;
    switch (psi.tag()) {
        case Functional<double>::Tag::DensityAt:
            return q(psi.location());
        case Functional<double>::Tag::CdfAt: {
            const double x0 = std::min(std::max(psi.location(), a), b);
            if (x0 <= a) return 0.0;
            const int intervals = std::max(2, static_cast<int>(20000 * (x0 - a) / (b - a)));
            return detail::simpson(q, a, x0, intervals);
        }
        case Functional<double>::Tag::Mean:
            return detail::simpson([&](double x) { return x * q(x); }, a, b, 20000);
        case Functional<double>::Tag::Custom:
            throw std::invalid_argument("true_functional: custom functionals unsupported");
    }
    return 0.0; // unreachable
}

/// Moments of the observation distribution Y = X + noise (or gamma-noised X),
/// with X from the truncated mixing density. Every kernel has E[Y|X] = X.
inline ObservationMoments true_observation_moments(const ExampleModel& model) {
    const auto q = [&](double x) { return model.mixing_density(x); };
    const double a = ExampleModel::support_lo;
    const double b = ExampleModel::support_hi;
    constexpr int n = 20000;

    // conditional central moments of Y - X given X = x
    const auto cond_var = [&](double x) {
        switch (model.kernel_id()) {
            case 1: return 0.25;
            case 2: return 0.09 * 5.0 / 3.0;
            default: return 20.0 * x / 400.0;
        }
    };
    const auto cond_m3 = [&](double x) {
        return model.kernel_id() == 3 ? 2.0 * 20.0 * x / 8000.0 : 0.0;
    };
    const auto cond_m4 = [&](double x) {
        switch (model.kernel_id()) {
            case 1: return 3.0 * 0.25 * 0.25;
            case 2: return 0.0081 * 25.0; // scale^4 * 3 df^2 / ((df-2)(df-4)), df = 5
            default: return 3.0 * 20.0 * x * (20.0 * x + 2.0) / 160000.0;
        }
    };

    const double mu = detail::simpson([&](double x) { return x * q(x); }, a, b, n);
    const double var_x =
        detail::simpson([&](double x) { return (x - mu) * (x - mu) * q(x); }, a, b, n);
    const double mean_cond_var = detail::simpson([&](double x) { return cond_var(x) * q(x); },
                                                 a, b, n);
    const double mu4 = detail::simpson(
        [&](double x) {
            const double d = x - mu;
            return (d * d * d * d + 6.0 * d * d * cond_var(x) + 4.0 * d * cond_m3(x) +
                    cond_m4(x)) *
                   q(x);
        },
        a, b, n);
    return ObservationMoments{mu, var_x + mean_cond_var, mu4};
}

/// Moments of the truncated mixing density itself (for signal-sampler checks).
inline ObservationMoments true_signal_moments(const ExampleModel& model) {
    const auto q = [&](double x) { return model.mixing_density(x); };
    const double a = ExampleModel::support_lo;
    const double b = ExampleModel::support_hi;
    constexpr int n = 20000;
    const double mu = detail::simpson([&](double x) { return x * q(x); }, a, b, n);
    const double var =
        detail::simpson([&](double x) { return (x - mu) * (x - mu) * q(x); }, a, b, n);
    const double mu4 = detail::simpson(
        [&](double x) {
            const double d = x - mu;
            return d * d * d * d * q(x);
        },
        a, b, n);
    return ObservationMoments{mu, var, mu4};
}

} // namespace prmix
