// Command-line surface for predictive recursion mixing-density estimation
// with permutation-based uncertainty quantification.
//
// Subcommands: estimate, ci, coverage, figure-data. Every command is a pure
// function of (config, input files, seed); reruns are byte-identical.
// Exit codes: 0 success, 2 input/config error, 3 numerical error.

#include "prmix/prmix.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prmix;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input_error = 2;
constexpr int exit_numeric_error = 3;

/// Input/config failure with an optional source line number.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg, long line_number = -1)
        : std::runtime_error(msg), line(line_number) {}
    long line;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> read_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file: " + path);
    std::vector<double> values;
    std::string line;
    long line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        const char* begin = line.c_str() + start;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw InputError("unparseable observation", line_number);
        while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
        if (*end != '\0') throw InputError("trailing junk after observation", line_number);
        if (!std::isfinite(v)) throw InputError("non-finite observation", line_number);
        values.push_back(v);
    }
    if (values.empty()) throw InputError("input file contains no observations");
    return values;
}

KernelFamily<double> parse_kernel(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find(':', pos);
        parts.push_back(text.substr(pos, next - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    const auto num = [&](std::size_t i) {
        try {
            return std::stod(parts.at(i));
        } catch (...) {
            throw InputError("bad kernel parameter in '" + text + "'");
        }
    };
    if (parts[0] == "normal" && parts.size() == 2)
        return KernelFamily<double>::normal(num(1));
    if ((parts[0] == "t" || parts[0] == "scaled_t") && parts.size() == 3)
        return KernelFamily<double>::scaled_t(num(1), num(2));
    if (parts[0] == "gamma" && parts.size() == 3)
        return KernelFamily<double>::gamma_shape_rate(num(1), num(2));
    throw InputError("unknown kernel '" + text +
                     "' (expected normal:SD, t:DF:SCALE, or gamma:MULT:RATE)");
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
}

void write_meta(const fs::path& dir, const std::string& name, const json& j) {
    auto out = open_out(dir, name);
    out << j.dump(2) << '\n';
}

/// Options shared across subcommands; each command validates the subset it
/// uses against the library preconditions before any computation starts.
struct Options {
    double grid_min = defaults::grid_lo;
    double grid_max = defaults::grid_hi;
    Eigen::Index grid_points = defaults::grid_points;
    double gamma = defaults::weight_exponent;
    Eigen::Index perms = defaults::permutations;
    double level = defaults::level;
    std::uint64_t seed = 0;
    std::string kernel_spec;
    std::vector<std::string> examples;
    std::vector<Eigen::Index> n_values;
    Eigen::Index reps = 200;
    std::vector<double> at;
    std::string input;
    std::string out_dir = ".";
    std::string functional = "density";
    bool emit_densities = false;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("--grid-min", opt.grid_min, "grid lower bound");
    cmd->add_option("--grid-max", opt.grid_max, "grid upper bound");
    cmd->add_option("--grid-points", opt.grid_points, "grid resolution");
    cmd->add_option("--gamma", opt.gamma, "weight exponent in (0.5, 1]");
    cmd->add_option("--perms", opt.perms, "permutation replicates");
    cmd->add_option("--level", opt.level, "confidence level in (0, 1)");
    cmd->add_option("--seed", opt.seed, "master seed");
    cmd->add_option("--out-dir", opt.out_dir, "output directory");
    cmd->add_option("--threads", opt.threads, "worker threads (results are thread-invariant)");
}

GridMeasure<double> make_working_grid(const Options& opt) {
    return GridMeasure<double>::lebesgue(opt.grid_min, opt.grid_max, opt.grid_points);
}

KernelFamily<double> resolve_kernel(const Options& opt) {
    if (!opt.kernel_spec.empty()) return parse_kernel(opt.kernel_spec);
    if (opt.examples.size() == 1) return ExampleModel::parse(opt.examples[0]).kernel();
    throw InputError("need --kernel or a single --example to select the kernel");
}

json common_meta(const std::string& command, const Options& opt) {
    json j;
    j["command"] = command;
    j["grid_min"] = opt.grid_min;
    j["grid_max"] = opt.grid_max;
    j["grid_points"] = opt.grid_points;
    j["gamma"] = opt.gamma;
    j["seed"] = opt.seed;
    return j;
}

// ---------------------------------------------------------------------------
// estimate: one recursion pass over an observation file
// ---------------------------------------------------------------------------

int cmd_estimate(const Options& opt) {
    const auto obs = read_observations(opt.input);
    const auto grid = make_working_grid(opt);
    const auto p0 = GridDensity<double>::uniform(grid);
    const auto kernel = resolve_kernel(opt);
    const WeightSchedule<double> schedule(opt.gamma);

    ArrayX<double> data = Eigen::Map<const ArrayX<double>>(
        obs.data(), static_cast<Eigen::Index>(obs.size()));
    const auto run = pr_run(data, p0, schedule, kernel);

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);

    auto density = open_out(dir, "density.csv");
    density << "x,density\n";
    for (Eigen::Index j = 0; j < grid.size(); ++j)
        density << fmt(grid.points()(j)) << ',' << fmt(run.density.values()(j)) << '\n';

    auto predictive = open_out(dir, "predictive.csv");
    predictive << "step,y,log_predictive\n";
    for (Eigen::Index i = 0; i < data.size(); ++i)
        predictive << (i + 1) << ',' << fmt(data(i)) << ',' << fmt(run.log_predictive(i))
                   << '\n';

    json meta = common_meta("estimate", opt);
    meta["input"] = opt.input;
    meta["kernel"] = opt.kernel_spec.empty() ? opt.examples[0] : opt.kernel_spec;
    meta["observations"] = obs.size();
    write_meta(dir, "estimate_meta.json", meta);

    std::cout << "estimate: wrote density.csv (" << grid.size() << " rows) and predictive.csv ("
              << data.size() << " rows) to " << dir.string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// ci: permutation ensemble, variance, and quantile interval per functional
// ---------------------------------------------------------------------------

Functional<double> make_functional(const std::string& kind, double at) {
    if (kind == "cdf") return Functional<double>::cdf_at(at);
    if (kind == "density") return Functional<double>::density_at(at);
    if (kind == "mean") return Functional<double>::mean();
    throw InputError("unknown functional '" + kind + "' (expected cdf, density, or mean)");
}

int cmd_ci(const Options& opt) {
    const auto obs = read_observations(opt.input);
    const auto grid = make_working_grid(opt);
    const auto p0 = GridDensity<double>::uniform(grid);
    const auto kernel = resolve_kernel(opt);
    const WeightSchedule<double> schedule(opt.gamma);

    if (opt.functional != "mean" && opt.at.empty())
        throw InputError("functional '" + opt.functional + "' needs at least one --at");
    std::vector<std::pair<std::string, Functional<double>>> functionals;
    if (opt.functional == "mean") {
        functionals.emplace_back("", make_functional("mean", 0.0));
    } else {
        for (const double x : opt.at)
            functionals.emplace_back(fmt(x), make_functional(opt.functional, x));
    }

    ArrayX<double> data = Eigen::Map<const ArrayX<double>>(
        obs.data(), static_cast<Eigen::Index>(obs.size()));
    const PermutationPlan plan(opt.perms, opt.seed);
    // one pass with retained densities; every functional reads the same runs
    const auto ensemble = build_ensemble(data, p0, schedule, kernel, functionals[0].second,
                                         plan, true, opt.threads);

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);

    auto values_csv = open_out(dir, "ensemble.csv");
    values_csv << "functional,at,replicate,value\n";
    auto intervals_csv = open_out(dir, "intervals.csv");
    intervals_csv << "functional,at,level,lower,upper,point,ensemble_variance\n";

    for (const auto& [at_label, psi] : functionals) {
        ArrayX<double> values(plan.count);
        for (Eigen::Index m = 0; m < plan.count; ++m)
            values(m) = apply_functional(psi, ensemble.densities[static_cast<std::size_t>(m)]);
        PermEnsemble<double> e{values, {}, plan, psi};
        const auto interval = quantile_interval(e, opt.level);
        const double variance = ensemble_variance(e);
        for (Eigen::Index m = 0; m < plan.count; ++m)
            values_csv << opt.functional << ',' << at_label << ',' << (m + 1) << ','
                       << fmt(values(m)) << '\n';
        intervals_csv << opt.functional << ',' << at_label << ',' << fmt(opt.level) << ','
                      << fmt(interval.lower) << ',' << fmt(interval.upper) << ','
                      << fmt(interval.point) << ',' << fmt(variance) << '\n';
    }

    if (opt.emit_densities) {
        auto band = open_out(dir, "ensemble_densities.csv");
        band << "replicate,x,value\n";
        for (Eigen::Index m = 0; m < plan.count; ++m) {
            const auto& d = ensemble.densities[static_cast<std::size_t>(m)];
            for (Eigen::Index j = 0; j < grid.size(); ++j)
                band << (m + 1) << ',' << fmt(grid.points()(j)) << ','
                     << fmt(d.values()(j)) << '\n';
        }
    }

    json meta = common_meta("ci", opt);
    meta["input"] = opt.input;
    meta["kernel"] = opt.kernel_spec.empty() ? opt.examples[0] : opt.kernel_spec;
    meta["functional"] = opt.functional;
    meta["at"] = opt.at;
    meta["level"] = opt.level;
    meta["perms"] = opt.perms;
    meta["emit_densities"] = opt.emit_densities;
    write_meta(dir, "ci_meta.json", meta);

    std::cout << "ci: wrote ensemble.csv and intervals.csv (" << functionals.size()
              << " functionals, M=" << opt.perms << ") to " << dir.string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// coverage: Monte Carlo coverage of the permutation interval
// ---------------------------------------------------------------------------

int cmd_coverage(const Options& opt) {
    if (opt.examples.empty()) throw InputError("coverage needs at least one --example");
    if (opt.n_values.empty()) throw InputError("coverage needs at least one --n");
    const std::vector<double> xs = opt.at.empty() ? std::vector<double>{2.0, 5.0, 8.0} : opt.at;

    const auto grid = make_working_grid(opt);
    const auto p0 = GridDensity<double>::uniform(grid);
    const WeightSchedule<double> schedule(opt.gamma);

    std::vector<std::pair<std::string, CoverageReport>> reports;
    for (const auto& example : opt.examples) {
        const auto model = ExampleModel::parse(example);
        for (const Eigen::Index n : opt.n_values) {
            CoverageConfig config;
            config.n = n;
            config.replications = opt.reps;
            config.permutations = opt.perms;
            config.level = opt.level;
            // stream keyed by (example, n) so adding rows never reshuffles seeds
            config.seed = derive_seed(opt.seed, static_cast<std::uint64_t>(
                                                    model.kernel_id() * 100 + model.mixing_id()) *
                                                    1000 +
                                                static_cast<std::uint64_t>(n));
            config.threads = opt.threads;
            reports.emplace_back(example, run_coverage(model, xs, config, p0, schedule));
            std::cerr << "coverage: example " << example << " n=" << n << " done ("
                      << reports.back().second.cells.front().wall_seconds << " s)\n";
        }
    }

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    auto csv = open_out(dir, "coverage.csv");
    csv << "example,kernel,mixing,n,x,replications,hits,coverage,mean_width,failures\n";
    for (const auto& [example, report] : reports)
        for (const auto& cell : report.cells)
            csv << example << ',' << cell.kernel_id << ',' << cell.mixing_id << ',' << cell.n
                << ',' << fmt(cell.x) << ',' << cell.replications << ',' << cell.hits << ','
                << fmt(cell.coverage) << ',' << fmt(cell.mean_width) << ',' << cell.failures
                << '\n';

    json meta = common_meta("coverage", opt);
    meta["examples"] = opt.examples;
    meta["n"] = opt.n_values;
    meta["x"] = xs;
    meta["reps"] = opt.reps;
    meta["perms"] = opt.perms;
    meta["level"] = opt.level;
    write_meta(dir, "coverage_meta.json", meta);

    std::cout << "coverage: wrote coverage.csv (" << reports.size() * xs.size() << " rows) to "
              << dir.string() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// figure-data: long-format records for the overlay figures
// ---------------------------------------------------------------------------

int cmd_figure_data(const Options& opt) {
    if (opt.examples.size() != 1) throw InputError("figure-data needs exactly one --example");
    if (opt.n_values.size() != 1) throw InputError("figure-data needs exactly one --n");
    if (opt.functional != "density" && opt.functional != "cdf")
        throw InputError("figure-data functional must be density or cdf");
    const bool cdf_mode = opt.functional == "cdf";
    const std::vector<double> xs = opt.at.empty() ? std::vector<double>{2.0, 5.0, 8.0} : opt.at;

    const auto model = ExampleModel::parse(opt.examples[0]);
    const auto grid = make_working_grid(opt);
    const auto p0 = GridDensity<double>::uniform(grid);
    const WeightSchedule<double> schedule(opt.gamma);

    Rng data_rng(derive_seed(opt.seed, 0));
    const ArrayX<double> data = sample_mixture(model, opt.n_values[0], data_rng);
    const PermutationPlan plan(opt.perms, derive_seed(opt.seed, 1));
    const auto ensemble = build_ensemble(data, p0, schedule, model.kernel(),
                                         Functional<double>::mean(), plan, true, opt.threads);

    // per-curve values on the grid: the density itself, or its running cdf
    const auto curve_of = [&](const ArrayX<double>& density) {
        if (!cdf_mode) return density;
        ArrayX<double> cdf(grid.size());
        double acc = 0.0;
        cdf(0) = 0.0;
        const double h = grid.spacing();
        for (Eigen::Index j = 1; j < grid.size(); ++j) {
            acc += h * (density(j - 1) + density(j)) / 2.0;
            cdf(j) = acc;
        }
        return cdf;
    };

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    auto curves = open_out(dir, "curves.csv");
    curves << "series,replicate,x,value\n";

    ArrayX<double> mean_curve = ArrayX<double>::Zero(grid.size());
    for (Eigen::Index m = 0; m < plan.count; ++m) {
        const auto curve = curve_of(ensemble.densities[static_cast<std::size_t>(m)].values());
        mean_curve += curve;
        for (Eigen::Index j = 0; j < grid.size(); ++j)
            curves << "perm," << (m + 1) << ',' << fmt(grid.points()(j)) << ','
                   << fmt(curve(j)) << '\n';
    }
    mean_curve /= static_cast<double>(plan.count);
    for (Eigen::Index j = 0; j < grid.size(); ++j)
        curves << "avg,0," << fmt(grid.points()(j)) << ',' << fmt(mean_curve(j)) << '\n';

    // true curve: oracle density at each grid point, or its cell-by-cell
    // quadrature accumulation in cdf mode
    ArrayX<double> true_curve(grid.size());
    if (cdf_mode) {
        double acc = 0.0;
        true_curve(0) = 0.0;
        for (Eigen::Index j = 1; j < grid.size(); ++j) {
            acc += detail::simpson([&](double x) { return model.mixing_density(x); },
                                   grid.points()(j - 1), grid.points()(j), 20);
            true_curve(j) = acc;
        }
    } else {
        for (Eigen::Index j = 0; j < grid.size(); ++j)
            true_curve(j) = model.mixing_density(grid.points()(j));
    }
    for (Eigen::Index j = 0; j < grid.size(); ++j)
        curves << "true,0," << fmt(grid.points()(j)) << ',' << fmt(true_curve(j)) << '\n';

    // sampling-distribution central interval at the requested x (vertical bars)
    auto bars = open_out(dir, "bars.csv");
    bars << "x,lower,upper\n";
    for (const double x : xs) {
        const auto psi = cdf_mode ? Functional<double>::cdf_at(x)
                                  : Functional<double>::density_at(x);
        const auto values = sampling_distribution(model, psi, opt.n_values[0], opt.reps,
                                                  derive_seed(opt.seed, 2), p0, schedule,
                                                  opt.threads);
        PermEnsemble<double> e{values, {}, PermutationPlan(values.size(), 0), psi};
        const auto interval = quantile_interval(e, opt.level);
        bars << fmt(x) << ',' << fmt(interval.lower) << ',' << fmt(interval.upper) << '\n';
    }

    json meta = common_meta("figure-data", opt);
    meta["example"] = opt.examples[0];
    meta["n"] = opt.n_values[0];
    meta["perms"] = opt.perms;
    meta["functional"] = opt.functional;
    meta["level"] = opt.level;
    meta["reps"] = opt.reps;
    meta["x"] = xs;
    write_meta(dir, "figure_data_meta.json", meta);

    std::cout << "figure-data: wrote curves.csv (" << (plan.count + 2) * grid.size()
              << " records) and bars.csv (" << xs.size() << " rows) to " << dir.string()
              << "\n";
    return exit_ok;
}

void report_error(const std::string& message, long line, long step) {
    json j;
    j["error"] = message;
    if (line >= 0) j["line"] = line;
    if (step >= 0) j["step"] = step;
    std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"predictive recursion mixing-density estimation with permutation-based "
                 "uncertainty quantification"};
    app.require_subcommand(1);
    // config keys live under a [subcommand] section; command-line flags win
    app.set_config("--config", "", "read parameters from a config file (flags win)");
    app.fallthrough(true);

    Options opt;

    auto* estimate = app.add_subcommand("estimate", "run the recursion over an input file");
    add_common(estimate, opt);
    estimate->add_option("--input", opt.input, "observations, one per line")->required();
    estimate->add_option("--kernel", opt.kernel_spec, "normal:SD | t:DF:SCALE | gamma:MULT:RATE");
    estimate->add_option("--example", opt.examples, "benchmark id a-b supplying the kernel");

    auto* ci = app.add_subcommand("ci", "permutation confidence interval for a functional");
    add_common(ci, opt);
    ci->add_option("--input", opt.input, "observations, one per line")->required();
    ci->add_option("--kernel", opt.kernel_spec, "normal:SD | t:DF:SCALE | gamma:MULT:RATE");
    ci->add_option("--example", opt.examples, "benchmark id a-b supplying the kernel");
    ci->add_option("--functional", opt.functional, "cdf | density | mean");
    ci->add_option("--at", opt.at, "functional location(s), repeatable");
    ci->add_flag("--emit-densities", opt.emit_densities, "also write all permuted densities");

    auto* coverage = app.add_subcommand("coverage", "interval coverage over replications");
    add_common(coverage, opt);
    coverage->add_option("--example", opt.examples, "benchmark id a-b, repeatable")->required();
    coverage->add_option("--n", opt.n_values, "sample size, repeatable")->required();
    coverage->add_option("--reps", opt.reps, "replications per cell");
    coverage->add_option("--at", opt.at, "density locations (default 2 5 8)");

    auto* figure = app.add_subcommand("figure-data", "curve and bar records for the figures");
    add_common(figure, opt);
    figure->add_option("--example", opt.examples, "benchmark id a-b")->required();
    figure->add_option("--n", opt.n_values, "sample size")->required();
    figure->add_option("--reps", opt.reps, "sampling-distribution replications for the bars");
    figure->add_option("--at", opt.at, "bar locations (default 2 5 8)");
    figure->add_option("--functional", opt.functional, "density | cdf curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        report_error(e.what(), -1, -1);
        return exit_input_error;
    }

    try {
        if (estimate->parsed()) return cmd_estimate(opt);
        if (ci->parsed()) return cmd_ci(opt);
        if (coverage->parsed()) return cmd_coverage(opt);
        if (figure->parsed()) return cmd_figure_data(opt);
        return exit_input_error;
    } catch (const InputError& e) {
        report_error(e.what(), e.line, -1);
        return exit_input_error;
    } catch (const DegeneratePredictiveError& e) {
        report_error(e.what(), -1, e.step);
        return exit_numeric_error;
    } catch (const std::invalid_argument& e) {
        report_error(e.what(), -1, -1);
        return exit_input_error;
    } catch (const std::domain_error& e) {
        report_error(e.what(), -1, -1);
        return exit_input_error;
    } catch (const std::exception& e) {
        report_error(e.what(), -1, -1);
        return exit_numeric_error;
    }
}
