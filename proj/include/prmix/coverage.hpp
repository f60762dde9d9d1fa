#pragma once

#include "prmix/examples.hpp"
#include "prmix/parallel.hpp"
#include "prmix/perm_uq.hpp"

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace prmix {

/// Interval-coverage experiment parameters. One master seed drives
/// everything: replication r samples its dataset from stream
/// derive_seed(derive_seed(seed, r), 0) and its permutations from
/// derive_seed(derive_seed(seed, r), 1), so partial reruns and any thread
/// count reproduce the same report.
struct CoverageConfig {
    Eigen::Index n = 500;
    Eigen::Index replications = 200;
    Eigen::Index permutations = 200;
    bool include_identity = true;
    double level = 0.95;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct CoverageCell {
    int kernel_id;
    int mixing_id;
    Eigen::Index n;
    double x;                  ///< functional location
    Eigen::Index replications; ///< successful replications scored
    Eigen::Index hits;
    Eigen::Index failures;
    double coverage;     ///< hits / replications
    double mean_width;   ///< average interval width over scored replications
    double wall_seconds; ///< wall time of the whole run (shared across cells)
};

struct CoverageReport {
    std::vector<CoverageCell> cells;
    double level;
    Eigen::Index permutations;
    std::uint64_t seed;
};

namespace detail {

template <typename Scalar>
struct CoverageTarget {
    Functional<Scalar> psi;
    Scalar truth;
    Scalar label; ///< x column in the report
};

/// Shared engine: per replication, sample one dataset, build one permutation
/// ensemble, and score every target against its interval.
inline CoverageReport run_coverage_targets(const ExampleModel& model,
                                           const std::vector<CoverageTarget<double>>& targets,
                                           const CoverageConfig& config,
                                           const GridDensity<double>& p0,
                                           const WeightSchedule<double>& schedule) {
    if (targets.empty()) throw std::invalid_argument("run_coverage: no targets");
    if (config.replications < 1)
        throw std::invalid_argument("run_coverage: need at least one replication");
    const GridMeasure<double>& grid = p0.grid();
    const auto n_targets = static_cast<Eigen::Index>(targets.size());
    const Eigen::Index r_count = config.replications;

    ArrayXX<double> hit(r_count, n_targets);
    ArrayXX<double> width(r_count, n_targets);
    std::vector<char> failed(static_cast<std::size_t>(r_count), 0);

    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(
        r_count,
        [&](Eigen::Index r) {
            try {
                const std::uint64_t rep_seed = derive_seed(config.seed,
                                                           static_cast<std::uint64_t>(r));
                Rng data_rng(derive_seed(rep_seed, 0));
                const ArrayX<double> data = sample_mixture(model, config.n, data_rng);
                const PermutationPlan plan(config.permutations, derive_seed(rep_seed, 1),
                                           config.include_identity);
                const ArrayXX<double> columns = kernel_matrix(model.kernel(), data, grid);

                ArrayXX<double> values(plan.count, n_targets);
                for_each_permuted_density(
                    columns, data, p0, schedule, plan,
                    [&](Eigen::Index m, ArrayX<double> v, ArrayX<double>,
                        std::vector<Eigen::Index>) {
                        for (Eigen::Index t = 0; t < n_targets; ++t)
                            values(m, t) = apply_on_values(
                                targets[static_cast<std::size_t>(t)].psi, grid, v);
                    });

                for (Eigen::Index t = 0; t < n_targets; ++t) {
                    PermEnsemble<double> e{values.col(t), {}, plan,
                                           targets[static_cast<std::size_t>(t)].psi};
                    const auto interval = quantile_interval(e, config.level);
                    hit(r, t) = interval.contains(targets[static_cast<std::size_t>(t)].truth)
                                    ? 1.0
                                    : 0.0;
                    width(r, t) = interval.upper - interval.lower;
                }
            } catch (...) {
                failed[static_cast<std::size_t>(r)] = 1;
            }
        },
        config.threads);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    CoverageReport report{{}, config.level, config.permutations, config.seed};
    report.cells.reserve(static_cast<std::size_t>(n_targets));
    for (Eigen::Index t = 0; t < n_targets; ++t) {
        CoverageCell cell{};
        cell.kernel_id = model.kernel_id();
        cell.mixing_id = model.mixing_id();
        cell.n = config.n;
        cell.x = targets[static_cast<std::size_t>(t)].label;
        cell.failures = 0;
        cell.hits = 0;
        for (Eigen::Index r = 0; r < r_count; ++r) {
            if (failed[static_cast<std::size_t>(r)]) {
                ++cell.failures;
                continue;
            }
            cell.hits += hit(r, t) > 0.5 ? 1 : 0;
            cell.mean_width += width(r, t);
        }
        cell.replications = r_count - cell.failures;
        cell.coverage =
            cell.replications > 0 ? static_cast<double>(cell.hits) / cell.replications : 0.0;
        cell.mean_width = cell.replications > 0 ? cell.mean_width / cell.replications : 0.0;
        cell.wall_seconds = wall;
        report.cells.push_back(cell);
    }
    return report;
}

} // namespace detail

/// Coverage of the nominal-level permutation interval for the mixing density
/// at each x: per replication, sample a dataset of size n, build the
/// permutation ensemble of p_n^s(x), and score whether the quantile interval
/// contains the true (truncated) mixing density.
inline CoverageReport run_coverage(const ExampleModel& model, const std::vector<double>& x_values,
                                   const CoverageConfig& config, const GridDensity<double>& p0,
                                   const WeightSchedule<double>& schedule) {
    std::vector<detail::CoverageTarget<double>> targets;
    targets.reserve(x_values.size());
    for (const double x : x_values) {
        const auto psi = Functional<double>::density_at(x);
        targets.push_back({psi, true_functional(model, psi), x});
    }
    return detail::run_coverage_targets(model, targets, config, p0, schedule);
}

/// Gold-standard sampling distribution: R independent datasets, one
/// identity-order run each, returning the R functional values. Dataset r
/// uses the same seed stream as replication r of run_coverage, so ensemble
/// statistics can be compared against the sampling spread on shared data.
inline ArrayX<double> sampling_distribution(const ExampleModel& model,
                                            const Functional<double>& psi, Eigen::Index n,
                                            Eigen::Index replications, std::uint64_t seed,
                                            const GridDensity<double>& p0,
                                            const WeightSchedule<double>& schedule,
                                            unsigned threads = 1) {
    if (replications < 2)
        throw std::invalid_argument("sampling_distribution: need at least 2 replications");
    ArrayX<double> values(replications);
    parallel_for(
        replications,
        [&](Eigen::Index r) {
            Rng data_rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(r)), 0));
            const ArrayX<double> data = sample_mixture(model, n, data_rng);
            const PrRun<double> run = pr_run(data, p0, schedule, model.kernel());
            values(r) = apply_functional(psi, run.density);
        },
        threads);
    return values;
}

} // namespace prmix
