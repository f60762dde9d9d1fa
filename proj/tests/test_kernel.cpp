#include "prmix/kernel.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace prmix;

namespace {

// independent closed-form pdfs (tgamma route, no shared code with the library)
double ref_normal_pdf(double y, double m, double sd) {
    return std::exp(-0.5 * (y - m) * (y - m) / (sd * sd)) / (sd * std::sqrt(2.0 * M_PI));
}
double ref_t_pdf(double t, double df) {
    return std::tgamma((df + 1.0) / 2.0) /
           (std::sqrt(df * M_PI) * std::tgamma(df / 2.0)) *
           std::pow(1.0 + t * t / df, -(df + 1.0) / 2.0);
}
double ref_gamma_pdf(double y, double shape, double rate) {
    return std::pow(rate, shape) * std::pow(y, shape - 1.0) * std::exp(-rate * y) /
           std::tgamma(shape);
}

} // namespace

TEST_CASE("normal kernel column peaks at the closed-form value") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 101);
    const auto k = KernelFamily<double>::normal(0.5);
    const double y = g.points()(40);
    const auto col = kernel_column(k, y, g);
    // frozen from the independent oracle: 1/(0.5 sqrt(2 pi))
    CHECK(col(40) == doctest::Approx(0.797884560802865).epsilon(1e-12));
    CHECK(col(40) == doctest::Approx(ref_normal_pdf(0.0, 0.0, 0.5)).epsilon(1e-12));
}

TEST_CASE("scaled t kernel column matches the closed-form t density") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 101);
    const auto k = KernelFamily<double>::scaled_t(5.0, 0.3);
    const double y = g.points()(25);
    const auto col = kernel_column(k, y, g);
    // frozen from the independent oracle: t5(0) / 0.3
    CHECK(col(25) == doctest::Approx(1.265355632741648).epsilon(1e-12));
    for (Eigen::Index j : {0, 13, 77}) {
        const double z = (y - g.points()(j)) / 0.3;
        CHECK(col(j) == doctest::Approx(ref_t_pdf(z, 5.0) / 0.3).epsilon(1e-12));
    }
}

TEST_CASE("gamma kernel column matches an independent gamma pdf") {
    ArrayX<double> pts(3);
    pts << 0.5, 1.0, 2.0;
    const auto g = GridMeasure<double>::counting(pts);
    const auto k = KernelFamily<double>::gamma_shape_rate(20.0, 20.0);
    const auto col = kernel_column(k, 1.0, g);
    // frozen from the independent oracle: Gamma(1 | shape 20, rate 20)
    CHECK(col(1) == doctest::Approx(1.776706347841704).epsilon(1e-10));
    for (Eigen::Index j = 0; j < 3; ++j)
        CHECK(col(j) ==
              doctest::Approx(ref_gamma_pdf(1.0, 20.0 * pts(j), 20.0)).epsilon(1e-10));
}

TEST_CASE("each kernel integrates to one in y") {
    const auto grid = GridMeasure<double>::lebesgue(0.5, 9.5, 10);
    // test lattice over a wide y range, trapezoid in y
    const auto check_kernel = [&](const KernelFamily<double>& k, double y_lo, double y_hi) {
        for (Eigen::Index j = 0; j < grid.size(); ++j) {
            const double x = grid.points()(j);
            const int n = 20001;
            const double h = (y_hi - y_lo) / (n - 1);
            double mass = 0.0;
            for (int i = 0; i < n; ++i) {
                const double y = y_lo + i * h;
                mass += k(y, x) * ((i == 0 || i == n - 1) ? h / 2 : h);
            }
            CHECK(std::abs(mass - 1.0) < 1e-3);
        }
    };
    check_kernel(KernelFamily<double>::normal(0.5), -20.0, 30.0);
    check_kernel(KernelFamily<double>::scaled_t(5.0, 0.3), -60.0, 70.0);
    check_kernel(KernelFamily<double>::gamma_shape_rate(20.0, 20.0), 1e-9, 40.0);
}

TEST_CASE("kernel columns stay nonnegative and finite over random y") {
    const auto g = GridMeasure<double>::lebesgue(0.1, 10.0, 300);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> y_all(-30.0, 30.0);
    std::uniform_real_distribution<double> y_pos(1e-6, 30.0);
    const auto kn = KernelFamily<double>::normal(0.5);
    const auto kt = KernelFamily<double>::scaled_t(5.0, 0.3);
    const auto kg = KernelFamily<double>::gamma_shape_rate(20.0, 20.0);
    for (int rep = 0; rep < 200; ++rep) {
        for (const auto* k : {&kn, &kt}) {
            const auto col = kernel_column(*k, y_all(rng), g);
            CHECK(col.isFinite().all());
            CHECK((col >= 0.0).all());
        }
        const auto col = kernel_column(kg, y_pos(rng), g);
        CHECK(col.isFinite().all());
        CHECK((col >= 0.0).all());
    }
}

TEST_CASE("gamma kernel rejects nonpositive observations") {
    ArrayX<double> pts(2);
    pts << 1.0, 2.0;
    const auto g = GridMeasure<double>::counting(pts);
    const auto k = KernelFamily<double>::gamma_shape_rate(20.0, 20.0);
    CHECK_THROWS_AS(kernel_column(k, 0.0, g), std::domain_error);
    CHECK_THROWS_AS(kernel_column(k, -1.0, g), std::domain_error);
}

TEST_CASE("gamma kernel vanishes at the x = 0 grid edge") {
    // shape 20x -> 0 degenerates to a point mass at zero, so the density at
    // any y > 0 is the limit value 0; the default [0,10] grid relies on this
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 11);
    const auto k = KernelFamily<double>::gamma_shape_rate(20.0, 20.0);
    const auto col = kernel_column(k, 1.0, g);
    CHECK(col(0) == 0.0);
    CHECK(col.isFinite().all());
    CHECK(k(1.0, 0.0) == 0.0);
    ArrayX<double> neg(2);
    neg << -1.0, 1.0;
    const auto gn = GridMeasure<double>::counting(neg);
    CHECK_THROWS_AS(kernel_column(k, 1.0, gn), std::domain_error);
}

TEST_CASE("kernel parameter validation") {
    CHECK_THROWS_AS(KernelFamily<double>::normal(0.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelFamily<double>::scaled_t(-1.0, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(KernelFamily<double>::gamma_shape_rate(20.0, 0.0), std::invalid_argument);
}

TEST_CASE("kernel matrix rows equal kernel columns") {
    const auto g = GridMeasure<double>::lebesgue(0.5, 9.5, 64);
    ArrayX<double> data(3);
    data << 1.0, 4.2, 7.7;
    for (const auto& k : {KernelFamily<double>::normal(0.5),
                          KernelFamily<double>::scaled_t(5.0, 0.3),
                          KernelFamily<double>::gamma_shape_rate(20.0, 20.0)}) {
        const auto m = kernel_matrix(k, data, g);
        REQUIRE(m.rows() == 3);
        REQUIRE(m.cols() == 64);
        for (Eigen::Index i = 0; i < 3; ++i) {
            const auto col = kernel_column(k, data(i), g);
            CHECK((m.row(i).transpose() - col).abs().maxCoeff() < 1e-14);
        }
    }
}

TEST_CASE("custom kernel evaluates pointwise") {
    ArrayX<double> pts(2);
    pts << 0.0, 1.0;
    const auto g = GridMeasure<double>::counting(pts);
    const auto k =
        KernelFamily<double>::custom([](double y, double x) { return y == x ? 0.8 : 0.2; });
    const auto col = kernel_column(k, 0.0, g);
    CHECK(col(0) == 0.8);
    CHECK(col(1) == 0.2);
}
