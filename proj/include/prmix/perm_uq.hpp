#pragma once

#include "prmix/functional.hpp"
#include "prmix/kernel.hpp"
#include "prmix/parallel.hpp"
#include "prmix/pr.hpp"
#include "prmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prmix {

/// Uniform permutation of {0, ..., n-1}: Fisher–Yates over the seeded
/// generator, unbiased via rejection-sampled bounded draws.
inline std::vector<Eigen::Index> sample_permutation(Eigen::Index n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_permutation: n must be >= 1");
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index(0));
    for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(
            rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

/// How to build a permutation ensemble: M replicates, seeded permutation
/// stream, and whether replicate 0 keeps the original data order.
/// Permutations are sampled with replacement from the permutation group;
/// replicate m draws its own generator seeded with derive_seed(seed, m).
struct PermutationPlan {
    Eigen::Index count = 200;
    std::uint64_t seed = 0;
    bool include_identity = true;

    PermutationPlan(Eigen::Index m, std::uint64_t rng_seed, bool with_identity = true)
        : count(m), seed(rng_seed), include_identity(with_identity) {
        if (m < 2) throw std::invalid_argument("PermutationPlan: need at least 2 replicates");
    }
};

/// Functional values of the recursion estimate across sampled permutations,
/// optionally with the permuted densities themselves.
template <typename Scalar = double>
struct PermEnsemble {
    ArrayX<Scalar> values;                      ///< Psi_n over the M replicates
    std::vector<GridDensity<Scalar>> densities; ///< empty unless requested
    PermutationPlan plan;
    Functional<Scalar> functional;
};

/// Quantile confidence interval. The point estimate is the ensemble mean
/// (the permutation-averaged estimator); it is not forced inside [lo, hi].
template <typename Scalar = double>
struct IntervalEstimate {
    Scalar lower;
    Scalar upper;
    Scalar level;
    Scalar point;

    bool contains(Scalar value) const { return lower <= value && value <= upper; }
};

namespace detail {

/// 1-based order-statistic rank ceil(q * m), clipped to [1, m]. The small
/// backoff keeps q*m from crossing an integer boundary through floating-point
/// noise (0.025 * 200 evaluates slightly above 5).
inline Eigen::Index quantile_rank(double q, Eigen::Index m) {
    const double x = q * static_cast<double>(m);
    auto r = static_cast<Eigen::Index>(std::ceil(x - 1e-9));
    return std::clamp<Eigen::Index>(r, 1, m);
}

/// Runs the recursion once per plan replicate against a precomputed kernel
/// matrix and hands each finished density to `sink(m, values)`. Replicate m
/// is reproducible in isolation: its permutation comes from a generator
/// seeded with derive_seed(plan.seed, m). Threads only split the replicate
/// loop; results are keyed by replicate index, so the schedule cannot change
/// any output.
template <typename Scalar, typename Sink>
void for_each_permuted_density(const ArrayXX<Scalar>& columns, const ArrayX<Scalar>& data,
                               const GridDensity<Scalar>& p0,
                               const WeightSchedule<Scalar>& schedule,
                               const PermutationPlan& plan, Sink&& sink,
                               unsigned threads = 1) {
    const Eigen::Index n = columns.rows();
    parallel_for(
        plan.count,
        [&](Eigen::Index m) {
            std::vector<Eigen::Index> perm;
            if (plan.include_identity && m == 0) {
                perm.resize(static_cast<std::size_t>(n));
                std::iota(perm.begin(), perm.end(), Eigen::Index(0));
            } else {
                Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(m)));
                perm = sample_permutation(n, rng);
            }
            try {
                auto [v, log_pred] = pr_fold(
                    n,
                    [&](Eigen::Index i) {
                        return columns.row(perm[static_cast<std::size_t>(i)]).transpose();
                    },
                    [&](Eigen::Index i) { return data(perm[static_cast<std::size_t>(i)]); },
                    p0, schedule);
                sink(m, std::move(v), std::move(log_pred), std::move(perm));
            } catch (const DegeneratePredictiveError& e) {
                throw DegeneratePredictiveError(std::string(e.what()) + " (replicate " +
                                                    std::to_string(m) + ")",
                                                e.step, e.observation);
            }
        },
        threads);
}

} // namespace detail

/// Permutation ensemble of Psi_n^s values for one dataset.
/// Same plan and seed give bitwise-identical results at any thread count.
template <typename Scalar>
PermEnsemble<Scalar> build_ensemble(const ArrayX<Scalar>& data, const GridDensity<Scalar>& p0,
                                    const WeightSchedule<Scalar>& schedule,
                                    const KernelFamily<Scalar>& k, const Functional<Scalar>& psi,
                                    const PermutationPlan& plan, bool keep_densities = false,
                                    unsigned threads = 1) {
    if (data.size() < 1) throw std::invalid_argument("build_ensemble: data must be nonempty");
    const GridMeasure<Scalar>& grid = p0.grid();
    const ArrayXX<Scalar> columns = kernel_matrix(k, data, grid);

    ArrayX<Scalar> values(plan.count);
    std::vector<GridDensity<Scalar>> densities;
    std::vector<ArrayX<Scalar>> raw(keep_densities ? static_cast<std::size_t>(plan.count) : 0);
    detail::for_each_permuted_density(
        columns, data, p0, schedule, plan,
        [&](Eigen::Index m, ArrayX<Scalar> v, ArrayX<Scalar>, std::vector<Eigen::Index>) {
            values(m) = detail::apply_on_values(psi, grid, v);
            if (keep_densities) raw[static_cast<std::size_t>(m)] = std::move(v);
        },
        threads);
    if (keep_densities) {
        densities.reserve(raw.size());
        for (auto& v : raw) densities.emplace_back(grid, std::move(v));
    }
    if (!values.isFinite().all())
        throw std::runtime_error("build_ensemble: non-finite functional value");
    return PermEnsemble<Scalar>{std::move(values), std::move(densities), plan, psi};
}

/// Unbiased sample variance (divisor M-1) of the ensemble's functional
/// values; estimates the conditional variance of Psi_n^S given the data.
template <typename Scalar>
Scalar ensemble_variance(const PermEnsemble<Scalar>& e) {
    const Eigen::Index m = e.values.size();
    if (m < 2) throw std::invalid_argument("ensemble_variance: need at least 2 values");
    const Scalar mean = e.values.mean();
    return (e.values - mean).square().sum() / Scalar(m - 1);
}

/// Central quantile interval at the given confidence level. Endpoints are
/// order statistics at ranks ceil(q M) (no interpolation), so they are always
/// realized ensemble values; the point estimate is the ensemble mean.
template <typename Scalar>
IntervalEstimate<Scalar> quantile_interval(const PermEnsemble<Scalar>& e, Scalar level) {
    if (!(level > Scalar(0)) || !(level < Scalar(1)))
        throw std::invalid_argument("quantile_interval: level must lie in (0, 1)");
    const Eigen::Index m = e.values.size();
    if (m < 2) throw std::invalid_argument("quantile_interval: need at least 2 values");
    std::vector<Scalar> sorted(e.values.data(), e.values.data() + m);
    std::sort(sorted.begin(), sorted.end());
    const double alpha = 1.0 - static_cast<double>(level);
    const Eigen::Index lo = detail::quantile_rank(alpha / 2.0, m);
    const Eigen::Index hi = detail::quantile_rank(1.0 - alpha / 2.0, m);
    return IntervalEstimate<Scalar>{sorted[static_cast<std::size_t>(lo - 1)],
                                    sorted[static_cast<std::size_t>(hi - 1)], level,
                                    e.values.mean()};
}

/// Fully enumerable model for checking the variance identity exactly:
/// finitely many observation outcomes with probabilities, and one kernel
/// column per outcome on a counting grid.
template <typename Scalar = double>
struct TinyModel {
    ArrayX<Scalar> outcome_values;  ///< observation support (for reporting)
    ArrayX<Scalar> outcome_probs;   ///< sums to 1
    ArrayXX<Scalar> kernel_columns; ///< row s = k(outcome_s | .), size S x G
};

template <typename Scalar = double>
struct IdentityReport {
    Scalar sampling_variance;              ///< variance of Psi_n over data sequences
    Scalar joint_variance;                 ///< variance of Psi_n^S over (data, permutation)
    Scalar identity_gap;                   ///< |sampling - joint|
    Scalar mean_conditional_variance;      ///< E_Y[ V_S(Psi_n^S | Y) ]
    Scalar variance_of_conditional_means;  ///< V_Y[ E_S(Psi_n^S | Y) ]
    Scalar decomposition_gap;              ///< |joint - (mcv + vcm)|
    Eigen::Index outcome_sequences;
    Eigen::Index permutations;
};

/// Exhaustive enumeration of every data sequence and every permutation on a
/// tiny discrete model. The sampling variance of Psi_n must equal the joint
/// variance of Psi_n^S exactly (the permutation layer adds no randomness when
/// the data are iid), and the joint variance must split into mean conditional
/// variance plus variance of conditional means (law of total variance).
template <typename Scalar>
IdentityReport<Scalar> verify_identity(const TinyModel<Scalar>& model, Eigen::Index n,
                                       const GridDensity<Scalar>& p0,
                                       const WeightSchedule<Scalar>& schedule,
                                       const Functional<Scalar>& psi) {
    const Eigen::Index s_count = model.outcome_values.size();
    if (s_count < 1 || model.outcome_probs.size() != s_count ||
        model.kernel_columns.rows() != s_count)
        throw std::invalid_argument("verify_identity: inconsistent model");
    if (p0.grid().kind() != MeasureKind::Counting)
        throw std::invalid_argument("verify_identity: needs a counting-measure grid");
    if (model.kernel_columns.cols() != p0.grid().size())
        throw std::invalid_argument("verify_identity: kernel columns mismatch grid");
    if (n < 1 || n > 4) throw std::invalid_argument("verify_identity: n must be in 1..4");
    if (std::abs(static_cast<double>(model.outcome_probs.sum()) - 1.0) > 1e-12)
        throw std::invalid_argument("verify_identity: outcome probabilities must sum to 1");

    double budget = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) budget *= static_cast<double>(s_count);
    double fact = 1.0;
    for (Eigen::Index i = 2; i <= n; ++i) fact *= static_cast<double>(i);
    if (budget * fact > 1e5)
        throw std::invalid_argument("verify_identity: enumeration budget exceeded");
    const auto n_seq = static_cast<Eigen::Index>(budget);
    const auto n_perm = static_cast<Eigen::Index>(fact);

    std::vector<std::vector<Eigen::Index>> perms;
    {
        std::vector<Eigen::Index> p(static_cast<std::size_t>(n));
        std::iota(p.begin(), p.end(), Eigen::Index(0));
        do {
            perms.push_back(p);
        } while (std::next_permutation(p.begin(), p.end()));
    }

    const GridMeasure<Scalar>& grid = p0.grid();
    ArrayXX<Scalar> psi_values(n_seq, n_perm);
    ArrayX<Scalar> seq_prob(n_seq);
    std::vector<Eigen::Index> digits(static_cast<std::size_t>(n), 0);
    for (Eigen::Index seq = 0; seq < n_seq; ++seq) {
        Scalar prob = Scalar(1);
        for (Eigen::Index i = 0; i < n; ++i)
            prob *= model.outcome_probs(digits[static_cast<std::size_t>(i)]);
        seq_prob(seq) = prob;
        for (Eigen::Index pi = 0; pi < n_perm; ++pi) {
            const auto& perm = perms[static_cast<std::size_t>(pi)];
            auto [v, log_pred] = detail::pr_fold(
                n,
                [&](Eigen::Index i) {
                    const Eigen::Index outcome =
                        digits[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
                    return model.kernel_columns.row(outcome).transpose();
                },
                [&](Eigen::Index i) {
                    return model.outcome_values(
                        digits[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
                },
                p0, schedule);
            psi_values(seq, pi) = detail::apply_on_values(psi, grid, v);
        }
        for (Eigen::Index i = n - 1; i >= 0; --i) { // mixed-radix increment
            if (++digits[static_cast<std::size_t>(i)] < s_count) break;
            digits[static_cast<std::size_t>(i)] = 0;
        }
    }

    // identity permutation sits first in lexicographic enumeration
    const auto weighted_var = [&](const ArrayX<Scalar>& vals, const ArrayX<Scalar>& w) {
        const Scalar mean = (w * vals).sum();
        return (w * (vals - mean).square()).sum();
    };
    const Scalar sampling_var = weighted_var(psi_values.col(0), seq_prob);

    ArrayX<Scalar> cond_mean(n_seq), cond_var(n_seq);
    for (Eigen::Index seq = 0; seq < n_seq; ++seq) {
        const ArrayX<Scalar> row = psi_values.row(seq).transpose();
        const Scalar mean = row.mean();
        cond_mean(seq) = mean;
        cond_var(seq) = (row - mean).square().mean();
    }
    ArrayX<Scalar> joint_vals(n_seq * n_perm), joint_w(n_seq * n_perm);
    for (Eigen::Index seq = 0; seq < n_seq; ++seq)
        for (Eigen::Index pi = 0; pi < n_perm; ++pi) {
            joint_vals(seq * n_perm + pi) = psi_values(seq, pi);
            joint_w(seq * n_perm + pi) = seq_prob(seq) / Scalar(n_perm);
        }
    const Scalar joint_var = weighted_var(joint_vals, joint_w);
    const Scalar mcv = (seq_prob * cond_var).sum();
    const Scalar vcm = weighted_var(cond_mean, seq_prob);

    using std::abs;
    return IdentityReport<Scalar>{sampling_var,
                                  joint_var,
                                  abs(sampling_var - joint_var),
                                  mcv,
                                  vcm,
                                  abs(joint_var - (mcv + vcm)),
                                  n_seq,
                                  n_perm};
}

} // namespace prmix
