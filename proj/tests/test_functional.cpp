#include "prmix/functional.hpp"

#include <doctest.h>

#include <cmath>

using namespace prmix;

namespace {

double ref_gamma_pdf(double y, double shape, double rate) {
    return std::pow(rate, shape) * std::pow(y, shape - 1.0) * std::exp(-rate * y) /
           std::tgamma(shape);
}

} // namespace

TEST_CASE("cdf_at covers total mass and proportional mass") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 1001);
    const auto p = GridDensity<double>::uniform(g);
    CHECK(std::abs(apply_functional(Functional<double>::cdf_at(10.0), p) - 1.0) <= 1e-10);
    CHECK(std::abs(apply_functional(Functional<double>::cdf_at(2.0), p) - 0.2) < 1e-6);
    CHECK(apply_functional(Functional<double>::cdf_at(-1.0), p) == 0.0);
    // off-grid points interpolate instead of staircasing
    CHECK(std::abs(apply_functional(Functional<double>::cdf_at(2.0037), p) - 0.20037) < 1e-6);
}

TEST_CASE("cdf_at is nondecreasing in its location") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 401);
    ArrayX<double> raw = (-(g.points() - 3.0).square() / 2.0).exp() +
                         0.3 * (-(g.points() - 7.5).square() * 2.0).exp();
    const auto p = GridDensity<double>::normalized(g, raw);
    double prev = -1.0;
    for (double x0 = -0.5; x0 <= 10.5; x0 += 0.0317) {
        const double c = apply_functional(Functional<double>::cdf_at(x0), p);
        CHECK(c >= prev - 1e-14);
        prev = c;
    }
}

TEST_CASE("counting-grid cdf is the discrete cdf") {
    ArrayX<double> pts(3);
    pts << 0.0, 1.0, 2.0;
    const auto g = GridMeasure<double>::counting(pts);
    ArrayX<double> v(3);
    v << 0.2, 0.3, 0.5;
    const GridDensity<double> p(g, v);
    CHECK(apply_functional(Functional<double>::cdf_at(0.0), p) == doctest::Approx(0.2));
    CHECK(apply_functional(Functional<double>::cdf_at(1.5), p) == doctest::Approx(0.5));
    CHECK(apply_functional(Functional<double>::cdf_at(5.0), p) == doctest::Approx(1.0));
}

TEST_CASE("mean of a discretized gamma matches high-resolution quadrature") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 2001);
    ArrayX<double> raw(g.size());
    for (Eigen::Index j = 0; j < g.size(); ++j)
        raw(j) = g.points()(j) > 0.0 ? ref_gamma_pdf(g.points()(j), 2.0, 1.0) : 0.0;
    const auto p = GridDensity<double>::normalized(g, raw);
    // frozen from the independent oracle (truncated Gamma(2,1) mean 1.995458)
    CHECK(std::abs(apply_functional(Functional<double>::mean(), p) - 1.99546) < 1e-3);
}

TEST_CASE("density_at reads the grid point value and rejects off-grid x") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 1001);
    const auto p = GridDensity<double>::uniform(g);
    CHECK(apply_functional(Functional<double>::density_at(2.0), p) == doctest::Approx(0.1));
    CHECK(apply_functional(Functional<double>::density_at(5.0), p) == doctest::Approx(0.1));
    CHECK_THROWS_AS(apply_functional(Functional<double>::density_at(2.0051), p),
                    std::invalid_argument);
}

TEST_CASE("custom all-ones functional recovers normalization") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 501);
    ArrayX<double> raw = (1.0 + (g.points() * 0.7).sin()).square() + 0.01;
    const auto p = GridDensity<double>::normalized(g, raw);
    const auto ones = Functional<double>::custom(ArrayX<double>::Ones(501));
    CHECK(std::abs(apply_functional(ones, p) - 1.0) <= 1e-10);
    CHECK(apply_functional(ones, p) ==
          doctest::Approx(apply_functional(Functional<double>::cdf_at(10.0), p)).epsilon(1e-10));
}

TEST_CASE("custom functional length must match the grid") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 1.0, 11);
    const auto p = GridDensity<double>::uniform(g);
    CHECK_THROWS_AS(apply_functional(Functional<double>::custom(ArrayX<double>::Ones(10)), p),
                    std::invalid_argument);
}
