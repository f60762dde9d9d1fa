#include "prmix/grid.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace prmix;

TEST_CASE("lebesgue grid carries trapezoidal weights") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 3);
    REQUIRE(g.size() == 3);
    CHECK(g.points()(0) == 0.0);
    CHECK(g.points()(1) == doctest::Approx(5.0));
    CHECK(g.points()(2) == 10.0);
    CHECK(g.quad_weights()(0) == doctest::Approx(2.5));
    CHECK(g.quad_weights()(1) == doctest::Approx(5.0));
    CHECK(g.quad_weights()(2) == doctest::Approx(2.5));
    CHECK(g.quad_weights().sum() == doctest::Approx(10.0));
}

TEST_CASE("lebesgue weight sum telescopes to b - a") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 1001);
    CHECK(std::abs(g.quad_weights().sum() - 10.0) <= 1e-12 * 10.0);

    // randomized bounds keep the identity
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> bound(-50.0, 50.0);
    for (int rep = 0; rep < 50; ++rep) {
        double a = bound(rng), b = bound(rng);
        if (a > b) std::swap(a, b);
        if (b - a < 1e-3) b = a + 1.0;
        const auto n = static_cast<Eigen::Index>(2 + rng() % 2000);
        const auto gg = GridMeasure<double>::lebesgue(a, b, n);
        CHECK(std::abs(gg.quad_weights().sum() - (b - a)) <= 1e-12 * (b - a));
        CHECK(gg.points()(0) == a);
        CHECK(gg.points()(n - 1) == b);
    }
}

TEST_CASE("counting grid takes external points with unit weights") {
    ArrayX<double> pts(2);
    pts << -1.5, 2.5;
    const auto g = GridMeasure<double>::counting(pts);
    CHECK(g.kind() == MeasureKind::Counting);
    CHECK(g.quad_weights()(0) == 1.0);
    CHECK(g.quad_weights()(1) == 1.0);
}

TEST_CASE("grid construction rejects bad input") {
    CHECK_THROWS_AS(GridMeasure<double>::lebesgue(1.0, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(GridMeasure<double>::lebesgue(0.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(
        GridMeasure<double>::lebesgue(0.0, std::numeric_limits<double>::infinity(), 5),
        std::invalid_argument);
    ArrayX<double> bad(2);
    bad << 1.0, 1.0;
    CHECK_THROWS_AS(GridMeasure<double>::counting(bad), std::invalid_argument);
    CHECK_THROWS_AS(GridMeasure<double>::counting(ArrayX<double>()), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(MeasureKind::Counting, 0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("integrate matches hand quadrature") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 1001);
    CHECK(integrate(g, ArrayX<double>::Constant(1001, 0.1)) == doctest::Approx(1.0).epsilon(1e-12));

    const auto unit = GridMeasure<double>::lebesgue(0.0, 1.0, 101);
    CHECK(std::abs(integrate(unit, unit.points()) - 0.5) < 1e-6);

    ArrayX<double> pts(2);
    pts << 0.0, 1.0;
    const auto c = GridMeasure<double>::counting(pts);
    ArrayX<double> v(2);
    v << 0.35, 0.65;
    CHECK(integrate(c, v) == doctest::Approx(1.0));
}

TEST_CASE("integrate validates input") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 1.0, 11);
    CHECK_THROWS_AS(integrate(g, ArrayX<double>::Ones(10)), std::invalid_argument);
    ArrayX<double> v = ArrayX<double>::Ones(11);
    v(3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(integrate(g, v), std::invalid_argument);
}

TEST_CASE("grid density validates mass and sign") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 101);
    CHECK_NOTHROW(GridDensity<double>(g, ArrayX<double>::Constant(101, 0.1)));
    CHECK_THROWS_AS(GridDensity<double>(g, ArrayX<double>::Constant(101, 0.2)),
                    std::invalid_argument);
    ArrayX<double> neg = ArrayX<double>::Constant(101, 0.1);
    neg(0) = -0.1;
    CHECK_THROWS_AS(GridDensity<double>(g, neg), std::invalid_argument);

    const auto p = GridDensity<double>::uniform(g);
    CHECK(std::abs(integrate(p) - 1.0) <= 1e-10);
}

TEST_CASE("normalized divides out the quadrature mass") {
    const auto g = GridMeasure<double>::lebesgue(0.0, 10.0, 1001);
    ArrayX<double> raw = (-(g.points() - 5.0).square()).exp();
    const auto p = GridDensity<double>::normalized(g, raw);
    CHECK(std::abs(integrate(p) - 1.0) <= 1e-10);
    CHECK_THROWS_AS(GridDensity<double>::normalized(g, ArrayX<double>::Zero(1001)),
                    std::invalid_argument);
}

TEST_CASE("grid ops instantiate for float") {
    const auto g = GridMeasure<float>::lebesgue(0.0f, 1.0f, 11);
    CHECK(std::abs(g.quad_weights().sum() - 1.0f) < 1e-5f);
    const auto p = GridDensity<float>::uniform(g);
    CHECK(std::abs(integrate(p) - 1.0f) < 1e-4f);
}
