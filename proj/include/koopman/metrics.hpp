#pragma once

#include <atomic>
#include <chrono>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "koopman/dictionary.hpp"
#include "koopman/edmd.hpp"
#include "koopman/serialize.hpp"
#include "koopman/ssd.hpp"
#include "koopman/systems.hpp"
#include "koopman/tssd.hpp"

namespace koopman {

/// Worker cap for sweep fan-out; defaults to sequential execution, raised via
/// the KOOPMAN_THREADS environment variable. Output is identical either way.
inline int thread_cap_from_env() {
    const char* raw = std::getenv("KOOPMAN_THREADS");
    if (!raw) return 1;
    const int value = std::atoi(raw);
    return value > 0 ? value : 1;
}

struct SweepRequest {
    SystemSpec system;
    int degree = 10;
    std::vector<double> epsilons;
    Index n_train = 10000;
    Index n_test = 0;  // 0 means "same as n_train"
    int traj_len = 3;
    std::uint64_t train_seed = 1;
    std::uint64_t test_seed = 2;
    TssdVariant variant = TssdVariant::efficient;
    linalg::RankTolerance rank_tol{};
    double eigen_slack = 1e-12;
    bool keep_models = false;  // retain the fitted model per epsilon
};

struct SweepRow {
    double epsilon;
    Index dim;
    double rrmse_train;
    double rrmse_test;
    int iters;
    double wall_time_s;
};

struct SweepReport {
    std::string system;
    Index n_train = 0;
    Index n_test = 0;
    Index n_d = 0;
    int degree = 0;
    std::uint64_t train_seed = 0;
    std::uint64_t test_seed = 0;
    std::string variant;
    std::vector<SweepRow> rows;
    std::vector<CoefficientBasis> bases;    // one per row
    std::vector<KoopmanModel> models;       // filled when keep_models is set
    std::vector<TssdTrace> traces;          // one per row
};

/// Full experiment protocol for one system: sample train/test snapshot pairs,
/// orthonormalize the polynomial dictionary on the training inputs, run the
/// chosen decomposition variant per epsilon, fit the restricted predictor, and
/// evaluate the worst-case relative error on both snapshot pairs. The test
/// evaluation reuses the training dictionary transform.
inline SweepReport run_sweep(const SweepRequest& req) {
    if (req.epsilons.empty()) throw ConfigError("run_sweep: need at least one epsilon");
    const SnapshotPair train =
        sample_snapshots(req.system, req.n_train, req.traj_len, req.train_seed);
    const Index n_test = req.n_test > 0 ? req.n_test : req.n_train;
    const SnapshotPair test = sample_snapshots(req.system, n_test, req.traj_len, req.test_seed);

    Dictionary dict = monomial_dictionary(req.system.state_dim, req.degree);
    dict = orthonormalize_on_data(dict, train.X, req.rank_tol);
    const Matrix dx = evaluate(dict, train.X);
    const Matrix dy = evaluate(dict, train.Y);
    const Matrix dx_test = evaluate(dict, test.X);
    const Matrix dy_test = evaluate(dict, test.Y);

    SweepReport report;
    report.system = to_string(req.system.name);
    report.n_train = req.n_train;
    report.n_test = n_test;
    report.n_d = dict.size();
    report.degree = req.degree;
    report.train_seed = req.train_seed;
    report.test_seed = req.test_seed;
    report.variant = to_string(req.variant);
    report.rows.resize(req.epsilons.size());
    report.bases.resize(req.epsilons.size());
    report.traces.resize(req.epsilons.size());
    if (req.keep_models) report.models.resize(req.epsilons.size());

    auto run_point = [&](std::size_t idx) {
        const double eps = req.epsilons[idx];
        TssdConfig cfg;
        cfg.epsilon = eps;
        cfg.rank_tol = req.rank_tol;
        cfg.eigen_slack = req.eigen_slack;
        cfg.variant = req.variant;
        const auto t0 = std::chrono::steady_clock::now();
        TssdResult run = run_tssd(dx, dy, cfg);
        Dictionary restricted = restrict(dict, run.basis);
        KoopmanModel model = edmd_fit(restricted, dx * run.basis.matrix, dy * run.basis.matrix,
                                      req.rank_tol);
        const double train_err = training_measure(dx, dy, run.basis, req.rank_tol);
        const double test_err =
            run.basis.is_sentinel()
                ? 0.0
                : linalg::epsilon_apart_measure(dx_test * run.basis.matrix,
                                                dy_test * run.basis.matrix, req.rank_tol);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.rows[idx] = SweepRow{eps,       run.basis.dim(), train_err,
                                    test_err,  run.trace.iters_used, elapsed};
        report.bases[idx] = run.basis;
        report.traces[idx] = std::move(run.trace);
        if (req.keep_models) report.models[idx] = std::move(model);
    };

    const int workers =
        std::min<int>(thread_cap_from_env(), static_cast<int>(req.epsilons.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < req.epsilons.size(); ++i) run_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < req.epsilons.size(); i = next++) run_point(i);
            });
        for (auto& t : pool) t.join();
    }
    return report;
}

/// Sweep serialization. Wall times vary across runs, so they are excluded by
/// default to keep reports byte-identical for identical seeds and config;
/// pass include_timing to retain them.
inline Json sweep_report_to_json(const SweepReport& report, bool include_timing = false) {
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        Json row{{"epsilon", r.epsilon},
                 {"dim", r.dim},
                 {"rrmse_train", r.rrmse_train},
                 {"rrmse_test", r.rrmse_test},
                 {"iters", r.iters}};
        if (include_timing) row["wall_time_s"] = r.wall_time_s;
        rows.push_back(std::move(row));
    }
    return Json{{"format", "sweep_report"},
                {"version", 1},
                {"system", report.system},
                {"n_train", report.n_train},
                {"n_test", report.n_test},
                {"n_d", report.n_d},
                {"degree", report.degree},
                {"train_seed", report.train_seed},
                {"test_seed", report.test_seed},
                {"variant", report.variant},
                {"rows", std::move(rows)}};
}

inline void sweep_report_to_csv(const SweepReport& report, const std::string& path,
                                bool include_timing = false) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "# sweep v1; system=" << report.system << "; n_train=" << report.n_train
        << "; n_test=" << report.n_test << "; n_d=" << report.n_d
        << "; degree=" << report.degree << "; train_seed=" << report.train_seed
        << "; test_seed=" << report.test_seed << "; variant=" << report.variant << "\n";
    out << "epsilon,dim,rrmse_train,rrmse_test,iters";
    if (include_timing) out << ",wall_time_s";
    out << "\n";
    for (const auto& r : report.rows) {
        out << io::format_double(r.epsilon) << "," << r.dim << ","
            << io::format_double(r.rrmse_train) << "," << io::format_double(r.rrmse_test) << ","
            << r.iters;
        if (include_timing) out << "," << io::format_double(r.wall_time_s);
        out << "\n";
    }
}

struct GridAxes {
    Index n1 = 101;
    Index n2 = 101;
    double lo1 = -2.0, hi1 = 2.0;
    double lo2 = -2.0, hi2 = 2.0;
};

namespace detail {

inline Matrix grid_states(const GridAxes& axes) {
    Matrix states(axes.n1 * axes.n2, 2);
    for (Index i = 0; i < axes.n1; ++i) {
        const double x1 =
            axes.n1 == 1 ? axes.lo1 : axes.lo1 + (axes.hi1 - axes.lo1) * i / double(axes.n1 - 1);
        for (Index j = 0; j < axes.n2; ++j) {
            const double x2 = axes.n2 == 1
                                  ? axes.lo2
                                  : axes.lo2 + (axes.hi2 - axes.lo2) * j / double(axes.n2 - 1);
            states(i * axes.n2 + j, 0) = x1;
            states(i * axes.n2 + j, 1) = x2;
        }
    }
    return states;
}

}  // namespace detail

/// Dense evaluation of one approximated eigenfunction over a planar grid.
struct EigenfunctionGrid {
    GridAxes axes;
    Matrix states;                             // grid points, row per point
    std::vector<std::complex<double>> values;  // one per grid point
    std::complex<double> eigenvalue;
};

inline EigenfunctionGrid eigenfunction_grid(const KoopmanModel& model, std::size_t idx,
                                            const GridAxes& axes) {
    if (model.dictionary.n_vars != 2)
        throw ConfigError("eigenfunction_grid: only 2-D state spaces are supported");
    if (idx >= model.eigenpairs.size())
        throw ConfigError("eigenfunction_grid: eigenpair index out of range");
    EigenfunctionGrid grid;
    grid.axes = axes;
    grid.states = detail::grid_states(axes);
    grid.eigenvalue = model.eigenpairs[idx].value;
    const Matrix evaluated = evaluate(model.dictionary, grid.states);
    Eigen::VectorXcd vals =
        evaluated.cast<std::complex<double>>() * model.eigenpairs[idx].vector;
    grid.values.assign(vals.data(), vals.data() + vals.size());
    return grid;
}

inline void eigenfunction_grid_to_csv(const EigenfunctionGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "# eigenfunction grid v1; eigenvalue=" << io::format_double(grid.eigenvalue.real())
        << (grid.eigenvalue.imag() < 0 ? "-" : "+")
        << io::format_double(std::abs(grid.eigenvalue.imag())) << "j\n";
    out << "x1,x2,abs,phase\n";
    for (Index i = 0; i < grid.states.rows(); ++i)
        out << io::format_double(grid.states(i, 0)) << "," << io::format_double(grid.states(i, 1))
            << "," << io::format_double(std::abs(grid.values[i])) << ","
            << io::format_double(std::arg(grid.values[i])) << "\n";
}

/// Relative linear prediction error (percent) over a planar grid; successor
/// states come from one discrete step of the system.
struct ErrorGrid {
    GridAxes axes;
    Matrix states;
    std::vector<double> error_pct;
};

inline ErrorGrid error_heatmap(const Dictionary& dict, const Matrix& k, const SystemSpec& spec,
                               const GridAxes& axes) {
    if (dict.n_vars != 2 || spec.state_dim != 2)
        throw ConfigError("error_heatmap: only 2-D state spaces are supported");
    ErrorGrid grid;
    grid.axes = axes;
    grid.states = detail::grid_states(axes);
    grid.error_pct.reserve(grid.states.rows());
    for (Index i = 0; i < grid.states.rows(); ++i) {
        const Vector x = grid.states.row(i).transpose();
        const Vector x_next = discrete_step(spec, x);
        grid.error_pct.push_back(relative_prediction_error(dict, k, x, x_next));
    }
    return grid;
}

inline void error_grid_to_csv(const ErrorGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "x1,x2,error_pct\n";
    for (Index i = 0; i < grid.states.rows(); ++i)
        out << io::format_double(grid.states(i, 0)) << "," << io::format_double(grid.states(i, 1))
            << "," << io::format_double(grid.error_pct[i]) << "\n";
}

}  // namespace koopman
