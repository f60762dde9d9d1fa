#include "prmix/coverage.hpp"

#include <doctest.h>

#include <cmath>

using namespace prmix;

namespace {

CoverageConfig small_config() {
    CoverageConfig c;
    c.n = 60;
    c.replications = 5;
    c.permutations = 8;
    c.level = 0.95;
    c.seed = 424242;
    c.threads = 1;
    return c;
}

GridDensity<double> small_p0() {
    return GridDensity<double>::uniform(GridMeasure<double>::lebesgue(0.0, 10.0, 201));
}

} // namespace

TEST_CASE("degenerate constant target is always covered") {
    const auto model = ExampleModel::make(1, 1);
    const auto p0 = small_p0();
    auto config = small_config();
    config.replications = 1;
    // psi = 0 forces every ensemble value (and the truth) to exactly 0
    std::vector<detail::CoverageTarget<double>> targets{
        {Functional<double>::custom(ArrayX<double>::Zero(201)), 0.0, 0.0},
        {Functional<double>::custom(ArrayX<double>::Ones(201)), 1.0, 1.0}};
    const auto report =
        detail::run_coverage_targets(model, targets, config, p0, WeightSchedule<double>(0.67));
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].coverage == 1.0);
    CHECK(report.cells[0].hits == 1);
    CHECK(report.cells[0].mean_width == 0.0);
    // the all-ones target pins the interval to 1 within normalization rounding
    CHECK(report.cells[1].mean_width <= 1e-10);
}

TEST_CASE("single-replication coverage is zero or one") {
    const auto model = ExampleModel::make(1, 1);
    auto config = small_config();
    config.replications = 1;
    const auto report = run_coverage(model, {5.0}, config, small_p0(),
                                     WeightSchedule<double>(0.67));
    REQUIRE(report.cells.size() == 1);
    CHECK((report.cells[0].coverage == 0.0 || report.cells[0].coverage == 1.0));
}

TEST_CASE("coverage report layout and determinism across thread counts") {
    const auto model = ExampleModel::make(1, 2);
    const auto p0 = small_p0();
    const WeightSchedule<double> sched(0.67);
    auto config = small_config();
    const auto a = run_coverage(model, {2.0, 5.0, 8.0}, config, p0, sched);
    config.threads = 2;
    const auto b = run_coverage(model, {2.0, 5.0, 8.0}, config, p0, sched);

    REQUIRE(a.cells.size() == 3);
    REQUIRE(b.cells.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        const auto& ca = a.cells[t];
        const auto& cb = b.cells[t];
        CHECK(ca.hits == cb.hits);
        CHECK(ca.coverage == cb.coverage);
        CHECK(ca.mean_width == cb.mean_width);
        CHECK(ca.replications == 5);
        CHECK(ca.failures == 0);
        CHECK(ca.hits <= ca.replications);
        CHECK(ca.coverage >= 0.0);
        CHECK(ca.coverage <= 1.0);
        CHECK(ca.n == 60);
        CHECK(ca.kernel_id == 1);
        CHECK(ca.mixing_id == 2);
    }
    CHECK(a.cells[0].x == 2.0);
    CHECK(a.cells[2].x == 8.0);
}

TEST_CASE("sampling distribution is deterministic and honors normalization") {
    const auto model = ExampleModel::make(1, 1);
    const auto p0 = small_p0();
    const WeightSchedule<double> sched(0.67);
    const auto a = sampling_distribution(model, Functional<double>::cdf_at(5.0), 40, 6, 99, p0,
                                         sched, 1);
    const auto b = sampling_distribution(model, Functional<double>::cdf_at(5.0), 40, 6, 99, p0,
                                         sched, 2);
    REQUIRE(a.size() == 6);
    CHECK((a == b).all());

    const auto ones = sampling_distribution(
        model, Functional<double>::custom(ArrayX<double>::Ones(201)), 40, 4, 99, p0, sched);
    CHECK((ones - 1.0).abs().maxCoeff() <= 1e-10);

    CHECK_THROWS_AS(
        sampling_distribution(model, Functional<double>::cdf_at(5.0), 40, 1, 9, p0, sched),
        std::invalid_argument);
}

TEST_CASE("coverage datasets reuse the sampling-distribution seed stream") {
    // replication r of run_coverage and draw r of sampling_distribution see
    // the same dataset; with M large and the same estimator the identity
    // replicate equals the sampling draw.
    const auto model = ExampleModel::make(1, 1);
    const auto p0 = small_p0();
    const WeightSchedule<double> sched(0.67);
    const std::uint64_t seed = 37;

    Rng data_rng(derive_seed(derive_seed(seed, 2), 0));
    const auto data = sample_mixture(model, 30, data_rng);
    const auto run = pr_run(data, p0, sched, model.kernel());

    const auto sd = sampling_distribution(model, Functional<double>::cdf_at(5.0), 30, 4, seed,
                                          p0, sched);
    CHECK(sd(2) == apply_functional(Functional<double>::cdf_at(5.0), run.density));
}
