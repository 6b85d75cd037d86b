// Command-line frontend: data generation, fitting, evaluation, sweeps.
//
// Exit codes: 0 success, 2 configuration error, 3 trajectory escaped the
// sampling domain, 4 rank precondition failed, 1 anything else.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "koopman/metrics.hpp"
#include "koopman/serialize.hpp"

namespace {

using koopman::ConfigError;
using koopman::Json;
using koopman::Matrix;

constexpr int kExitConfig = 2;
constexpr int kExitEscape = 3;
constexpr int kExitRank = 4;

// One JSON-backed option: lets --config files supply any flag not given on
// the command line, and --save-config write the fully resolved run back out.
struct OptionBinding {
    std::string key;
    std::function<Json()> save;
    std::function<void(const Json&)> load;
};

class ConfigurableCommand {
  public:
    ConfigurableCommand(CLI::App* cmd) : cmd_(cmd) {
        cmd->add_option("--config", config_path_, "JSON config with option defaults");
        cmd->add_option("--save-config", save_path_, "write the resolved options as JSON");
    }

    template <typename T>
    void bind(const std::string& key, T& value) {
        bindings_.push_back(OptionBinding{
            key, [&value] { return Json(value); },
            [&value](const Json& j) { value = j.get<T>(); }});
    }

    // apply config-file values for options absent from the command line,
    // then persist the resolved set when requested
    void finalize() {
        if (!config_path_.empty()) {
            const Json loaded = koopman::io::load_json(config_path_);
            for (const auto& b : bindings_)
                if (cmd_->count("--" + b.key) == 0 && loaded.contains(b.key))
                    b.load(loaded.at(b.key));
        }
        if (!save_path_.empty()) {
            Json out;
            for (const auto& b : bindings_) out[b.key] = b.save();
            koopman::io::save_json(save_path_, out);
        }
    }

  private:
    CLI::App* cmd_;
    std::string config_path_, save_path_;
    std::vector<OptionBinding> bindings_;
};

std::vector<double> parse_epsilons(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (cell.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str()) throw ConfigError("bad epsilon value: " + cell);
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--epsilons produced an empty list");
    return out;
}

// "lo:hi,lo:hi,..." one interval per coordinate
std::vector<std::array<double, 2>> parse_box(const std::string& text) {
    std::vector<std::array<double, 2>> box;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto colon = cell.find(':');
        if (colon == std::string::npos) throw ConfigError("bad interval (want lo:hi): " + cell);
        box.push_back({std::strtod(cell.substr(0, colon).c_str(), nullptr),
                       std::strtod(cell.substr(colon + 1).c_str(), nullptr)});
    }
    if (box.empty()) throw ConfigError("--domain produced an empty box");
    return box;
}

// "a11,a12;a21,a22" row-major with ; between rows
Matrix parse_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string row_text;
    while (std::getline(ss, row_text, ';')) {
        std::vector<double> row;
        std::stringstream rs(row_text);
        std::string cell;
        while (std::getline(rs, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError("--matrix rows have unequal lengths");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("--matrix is empty");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j) m(i, j) = rows[i][j];
    return m;
}

koopman::SystemSpec build_system(const std::string& name, double dt, const std::string& domain,
                                 const std::string& matrix, const std::string& integrator) {
    koopman::SystemSpec spec;
    switch (koopman::system_from_string(name)) {
        case koopman::SystemName::hopf: spec = koopman::SystemSpec::hopf(); break;
        case koopman::SystemName::duffing: spec = koopman::SystemSpec::duffing(); break;
        case koopman::SystemName::harmonic_consensus:
            spec = koopman::SystemSpec::harmonic_consensus();
            break;
        case koopman::SystemName::linear_custom: {
            if (matrix.empty())
                throw ConfigError("--matrix is required for the linear_custom system");
            const Matrix a = parse_matrix(matrix);
            std::vector<std::array<double, 2>> box(a.rows(), {-1.0, 1.0});
            spec = koopman::SystemSpec::linear(a, box, dt > 0 ? dt : 0.01);
            break;
        }
    }
    if (dt > 0) spec.dt = dt;
    if (!domain.empty()) {
        spec.domain = parse_box(domain);
        if (static_cast<int>(spec.domain.size()) != spec.state_dim)
            throw ConfigError("--domain must provide one interval per coordinate");
    }
    if (integrator == "euler") spec.integrator = koopman::Integrator::euler;
    else if (integrator != "rk4") throw ConfigError("unknown integrator: " + integrator);
    spec.validate();
    return spec;
}

koopman::TssdVariant variant_from_string(const std::string& name) {
    if (name == "plain") return koopman::TssdVariant::plain;
    if (name == "efficient") return koopman::TssdVariant::efficient;
    if (name == "monotone") return koopman::TssdVariant::monotone;
    throw ConfigError("unknown variant: " + name);
}

koopman::linalg::RankTolerance tolerance_from(double rank_tol) {
    return rank_tol > 0 ? koopman::linalg::RankTolerance::fixed(rank_tol)
                        : koopman::linalg::RankTolerance{};
}

// ---------------------------------------------------------------- simulate
struct SimulateOptions {
    std::string system = "hopf";
    std::int64_t n = 0;
    int traj_len = 3;
    double dt = 0.0;
    std::uint64_t seed = 1;
    std::string domain, matrix;
    std::string integrator = "rk4";
    std::string out;
};

void run_simulate(const SimulateOptions& opt) {
    if (opt.out.empty()) throw ConfigError("simulate requires --out");
    if (opt.n < 1) throw ConfigError("simulate requires --n >= 1");
    koopman::SystemSpec spec =
        build_system(opt.system, opt.dt, opt.domain, opt.matrix, opt.integrator);
    koopman::SnapshotPair pair =
        koopman::sample_snapshots(spec, opt.n, opt.traj_len, opt.seed);
    koopman::write_snapshots_csv(opt.out, pair,
                                 koopman::SnapshotMeta{opt.system, spec.dt, opt.seed});
    std::cout << "wrote " << pair.X.rows() << " snapshot pairs of dimension " << pair.X.cols()
              << " to " << opt.out << "\n";
}

// --------------------------------------------------------------------- fit
struct FitOptions {
    std::string data;
    std::string method = "tssd";
    int degree = 10;
    double epsilon = -1.0;
    std::string variant = "efficient";
    bool raw_dictionary = false;
    double rank_tol = 0.0;
    std::string out = "fit";
};

void run_fit(const FitOptions& opt) {
    if (opt.data.empty()) throw ConfigError("fit requires --data");
    const koopman::SnapshotFile file = koopman::read_snapshots_csv(opt.data);
    const auto tol = tolerance_from(opt.rank_tol);
    koopman::Dictionary dict =
        koopman::monomial_dictionary(static_cast<int>(file.pair.X.cols()), opt.degree);
    if (!opt.raw_dictionary) dict = koopman::orthonormalize_on_data(dict, file.pair.X, tol);
    const Matrix dx = koopman::evaluate(dict, file.pair.X);
    const Matrix dy = koopman::evaluate(dict, file.pair.Y);

    koopman::CoefficientBasis basis{Matrix::Identity(dict.size(), dict.size())};
    if (opt.method == "edmd") {
        // keep the full dictionary
    } else if (opt.method == "ssd") {
        basis = koopman::ssd(dx, dy, tol);
    } else if (opt.method == "tssd") {
        if (opt.epsilon < 0)
            throw ConfigError("fit --method tssd requires --epsilon");
        koopman::TssdConfig cfg;
        cfg.epsilon = opt.epsilon;
        cfg.rank_tol = tol;
        cfg.variant = variant_from_string(opt.variant);
        koopman::TssdResult run = koopman::run_tssd(dx, dy, cfg);
        if (run.trace.epsilon_substituted)
            std::cout << "notice: epsilon 0 was replaced by 1e-12 internally\n";
        basis = run.basis;
        koopman::io::save_json(opt.out + ".trace.json", koopman::to_json(run.trace));
    } else {
        throw ConfigError("unknown method: " + opt.method + " (want edmd, ssd, or tssd)");
    }

    koopman::Dictionary restricted = koopman::restrict(dict, basis);
    koopman::KoopmanModel model =
        koopman::edmd_fit(restricted, dx * basis.matrix, dy * basis.matrix, tol);
    const double train_rrmse = koopman::training_measure(dx, dy, basis, tol);
    koopman::io::save_json(opt.out + ".basis.json", koopman::to_json(basis));
    koopman::io::save_json(opt.out + ".model.json", koopman::to_json(model));
    std::cout << "method=" << opt.method << " dim=" << basis.dim()
              << " train_rrmse_max=" << train_rrmse << " fit_residual=" << model.fit_residual
              << "\n";
}

// ------------------------------------------------------------------- sweep
struct SweepOptions {
    std::string system = "hopf";
    std::string epsilons;
    int degree = 10;
    std::int64_t n = 10000;
    std::int64_t n_test = 0;
    int traj_len = 3;
    std::uint64_t seed = 1;
    std::uint64_t test_seed = 2;
    std::string variant = "efficient";
    double dt = 0.0;
    std::string domain, matrix;
    double rank_tol = 0.0;
    bool timing = false;
    std::string out = "sweep";
};

void run_sweep_cmd(const SweepOptions& opt) {
    if (opt.epsilons.empty()) throw ConfigError("sweep requires --epsilons");
    koopman::SweepRequest req;
    req.system = build_system(opt.system, opt.dt, opt.domain, opt.matrix, "rk4");
    req.degree = opt.degree;
    req.epsilons = parse_epsilons(opt.epsilons);
    req.n_train = opt.n;
    req.n_test = opt.n_test;
    req.traj_len = opt.traj_len;
    req.train_seed = opt.seed;
    req.test_seed = opt.test_seed;
    req.variant = variant_from_string(opt.variant);
    req.rank_tol = tolerance_from(opt.rank_tol);
    koopman::SweepReport report = koopman::run_sweep(req);
    koopman::sweep_report_to_csv(report, opt.out + ".csv", opt.timing);
    koopman::io::save_json(opt.out + ".json",
                           koopman::sweep_report_to_json(report, opt.timing));
    std::cout << "system=" << report.system << " N=" << report.n_train
              << " N_d=" << report.n_d << " variant=" << report.variant << "\n";
    std::cout << "epsilon    dim    rrmse_train    rrmse_test    iters    seconds\n";
    for (const auto& row : report.rows) {
        std::printf("%-10g %-6ld %-14.6g %-13.6g %-8d %.2f\n", row.epsilon,
                    static_cast<long>(row.dim), row.rrmse_train, row.rrmse_test, row.iters,
                    row.wall_time_s);
    }
}

// -------------------------------------------------------------------- eval
struct EvalOptions {
    std::string model;
    std::string test;
};

void run_eval(const EvalOptions& opt) {
    const koopman::KoopmanModel model =
        koopman::koopman_model_from_json(koopman::io::load_json(opt.model));
    const koopman::SnapshotFile file = koopman::read_snapshots_csv(opt.test);
    const double err = koopman::rrmse_max(model.dictionary, file.pair.X, file.pair.Y);
    std::cout << "rrmse_max=" << err << " (dim=" << model.dictionary.size()
              << ", n_test=" << file.pair.X.rows() << ")\n";
}

// ------------------------------------------------------------------ eigfun
struct EigfunOptions {
    std::string model;
    int idx = 0;
    int grid = 101;
    std::string box = "-2:2,-2:2";
    std::string out = "eigfun.csv";
};

void run_eigfun(const EigfunOptions& opt) {
    const koopman::KoopmanModel model =
        koopman::koopman_model_from_json(koopman::io::load_json(opt.model));
    if (opt.idx < 0 || static_cast<std::size_t>(opt.idx) >= model.eigenpairs.size())
        throw ConfigError("--idx out of range (model has " +
                          std::to_string(model.eigenpairs.size()) + " eigenpairs)");
    const auto box = parse_box(opt.box);
    if (box.size() != 2) throw ConfigError("--box must provide two intervals");
    koopman::GridAxes axes;
    axes.n1 = axes.n2 = opt.grid;
    axes.lo1 = box[0][0];
    axes.hi1 = box[0][1];
    axes.lo2 = box[1][0];
    axes.hi2 = box[1][1];
    koopman::EigenfunctionGrid grid = koopman::eigenfunction_grid(model, opt.idx, axes);
    koopman::eigenfunction_grid_to_csv(grid, opt.out);
    std::cout << "eigenvalue=" << grid.eigenvalue.real()
              << (grid.eigenvalue.imag() < 0 ? "-" : "+") << std::abs(grid.eigenvalue.imag())
              << "j grid=" << axes.n1 << "x" << axes.n2 << " -> " << opt.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman subspace identification toolkit"};
    app.require_subcommand(1);

    SimulateOptions sim;
    CLI::App* simulate = app.add_subcommand("simulate", "sample snapshot pairs to CSV");
    ConfigurableCommand sim_cfg(simulate);
    simulate->add_option("--system", sim.system, "hopf | duffing | consensus | linear");
    simulate->add_option("--n", sim.n, "number of snapshot pairs");
    simulate->add_option("--traj-len", sim.traj_len, "states per trajectory (>= 2)");
    simulate->add_option("--dt", sim.dt, "time step override");
    simulate->add_option("--seed", sim.seed, "sampling seed");
    simulate->add_option("--domain", sim.domain, "per-coordinate box lo:hi,lo:hi,...");
    simulate->add_option("--matrix", sim.matrix, "linear system matrix a11,a12;a21,a22");
    simulate->add_option("--integrator", sim.integrator, "rk4 | euler");
    simulate->add_option("-o,--out", sim.out, "output CSV path");
    sim_cfg.bind("system", sim.system);
    sim_cfg.bind("n", sim.n);
    sim_cfg.bind("traj-len", sim.traj_len);
    sim_cfg.bind("dt", sim.dt);
    sim_cfg.bind("seed", sim.seed);
    sim_cfg.bind("domain", sim.domain);
    sim_cfg.bind("matrix", sim.matrix);
    sim_cfg.bind("integrator", sim.integrator);
    sim_cfg.bind("out", sim.out);

    FitOptions fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a Koopman approximation from snapshots");
    ConfigurableCommand fit_cfg(fit_cmd);
    fit_cmd->add_option("--data", fit.data, "snapshot CSV");
    fit_cmd->add_option("--method", fit.method, "edmd | ssd | tssd");
    fit_cmd->add_option("--degree", fit.degree, "max polynomial degree");
    fit_cmd->add_option("--epsilon", fit.epsilon, "accuracy parameter (tssd)");
    fit_cmd->add_option("--variant", fit.variant, "plain | efficient | monotone");
    fit_cmd->add_flag("--raw-dictionary", fit.raw_dictionary,
                      "skip orthonormalizing the dictionary on the data");
    fit_cmd->add_option("--rank-tol", fit.rank_tol, "relative singular value cutoff");
    fit_cmd->add_option("-o,--out", fit.out, "output file prefix");
    fit_cfg.bind("data", fit.data);
    fit_cfg.bind("method", fit.method);
    fit_cfg.bind("degree", fit.degree);
    fit_cfg.bind("epsilon", fit.epsilon);
    fit_cfg.bind("variant", fit.variant);
    fit_cfg.bind("raw-dictionary", fit.raw_dictionary);
    fit_cfg.bind("rank-tol", fit.rank_tol);
    fit_cfg.bind("out", fit.out);

    SweepOptions sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "epsilon sweep with train/test errors");
    ConfigurableCommand sweep_cfg(sweep_cmd);
    sweep_cmd->add_option("--system", sweep.system, "hopf | duffing | consensus | linear");
    sweep_cmd->add_option("--epsilons", sweep.epsilons, "comma-separated list");
    sweep_cmd->add_option("--degree", sweep.degree, "max polynomial degree");
    sweep_cmd->add_option("--n", sweep.n, "training snapshot pairs");
    sweep_cmd->add_option("--n-test", sweep.n_test, "test snapshot pairs (default: same as --n)");
    sweep_cmd->add_option("--traj-len", sweep.traj_len, "states per trajectory");
    sweep_cmd->add_option("--seed", sweep.seed, "training seed");
    sweep_cmd->add_option("--test-seed", sweep.test_seed, "test seed");
    sweep_cmd->add_option("--variant", sweep.variant, "plain | efficient | monotone");
    sweep_cmd->add_option("--dt", sweep.dt, "time step override");
    sweep_cmd->add_option("--domain", sweep.domain, "per-coordinate box lo:hi,...");
    sweep_cmd->add_option("--matrix", sweep.matrix, "linear system matrix");
    sweep_cmd->add_option("--rank-tol", sweep.rank_tol, "relative singular value cutoff");
    sweep_cmd->add_flag("--timing", sweep.timing, "include wall times in output files");
    sweep_cmd->add_option("-o,--out", sweep.out, "output file prefix");
    sweep_cfg.bind("system", sweep.system);
    sweep_cfg.bind("epsilons", sweep.epsilons);
    sweep_cfg.bind("degree", sweep.degree);
    sweep_cfg.bind("n", sweep.n);
    sweep_cfg.bind("n-test", sweep.n_test);
    sweep_cfg.bind("traj-len", sweep.traj_len);
    sweep_cfg.bind("seed", sweep.seed);
    sweep_cfg.bind("test-seed", sweep.test_seed);
    sweep_cfg.bind("variant", sweep.variant);
    sweep_cfg.bind("dt", sweep.dt);
    sweep_cfg.bind("domain", sweep.domain);
    sweep_cfg.bind("matrix", sweep.matrix);
    sweep_cfg.bind("rank-tol", sweep.rank_tol);
    sweep_cfg.bind("timing", sweep.timing);
    sweep_cfg.bind("out", sweep.out);

    EvalOptions eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model on a test snapshot file");
    eval_cmd->add_option("--model", eval.model, "model JSON")->required();
    eval_cmd->add_option("--test", eval.test, "snapshot CSV")->required();

    EigfunOptions eig;
    CLI::App* eig_cmd = app.add_subcommand("eigfun", "export an eigenfunction grid to CSV");
    eig_cmd->add_option("--model", eig.model, "model JSON")->required();
    eig_cmd->add_option("--idx", eig.idx, "eigenpair index");
    eig_cmd->add_option("--grid", eig.grid, "grid resolution per axis");
    eig_cmd->add_option("--box", eig.box, "grid box lo:hi,lo:hi");
    eig_cmd->add_option("-o,--out", eig.out, "output CSV path");

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) {
            sim_cfg.finalize();
            run_simulate(sim);
        } else if (fit_cmd->parsed()) {
            fit_cfg.finalize();
            run_fit(fit);
        } else if (sweep_cmd->parsed()) {
            sweep_cfg.finalize();
            run_sweep_cmd(sweep);
        } else if (eval_cmd->parsed()) {
            run_eval(eval);
        } else if (eig_cmd->parsed()) {
            run_eigfun(eig);
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    } catch (const koopman::TrajectoryEscapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEscape;
    } catch (const koopman::RankPreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRank;
    } catch (const koopman::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const koopman::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
