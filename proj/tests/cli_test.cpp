// End-to-end tests of the command-line tool: spawns the real binary.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "koopman/linalg.hpp"
#include "koopman/serialize.hpp"

#ifndef KOOPMAN_CLI_PATH
#error "KOOPMAN_CLI_PATH must point at the built binary"
#endif

namespace {

namespace fs = std::filesystem;

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("koopman_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string file(const std::string& name) const { return (dir / name).string(); }
};

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const Workspace& ws, const std::string& args) {
    const std::string out_path = ws.file("stdout.txt"), err_path = ws.file("stderr.txt");
    const std::string cmd =
        std::string(KOOPMAN_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

}  // namespace

TEST(CliSimulate, WritesDeterministicSnapshotFiles) {
    Workspace ws;
    auto r1 = run_cli(ws, "simulate --system duffing --n 50 --seed 9 -o " + ws.file("a.csv"));
    ASSERT_EQ(r1.exit_code, 0) << r1.err;
    EXPECT_NE(r1.out.find("50 snapshot pairs"), std::string::npos);
    auto r2 = run_cli(ws, "simulate --system duffing --n 50 --seed 9 -o " + ws.file("b.csv"));
    ASSERT_EQ(r2.exit_code, 0);
    EXPECT_EQ(slurp(ws.file("a.csv")), slurp(ws.file("b.csv")));
    auto r3 = run_cli(ws, "simulate --system duffing --n 50 --seed 10 -o " + ws.file("c.csv"));
    ASSERT_EQ(r3.exit_code, 0);
    EXPECT_NE(slurp(ws.file("a.csv")), slurp(ws.file("c.csv")));
}

TEST(CliSimulate, DomainEscapeExitsWithCode3) {
    Workspace ws;
    // a box crossing zero puts consensus states where the harmonic mean is undefined
    auto r = run_cli(ws, "simulate --system consensus --n 10 --traj-len 2 "
                         "--domain -1:5,-1:5,-1:5,-1:5,-1:5 --seed 3 -o " +
                             ws.file("x.csv"));
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("("), std::string::npos);  // offending state is printed
}

TEST(CliSimulate, BadConfigurationExitsWithCode2) {
    Workspace ws;
    EXPECT_EQ(run_cli(ws, "simulate --system not_a_system --n 10 -o " + ws.file("x.csv"))
                  .exit_code,
              2);
    EXPECT_EQ(run_cli(ws, "simulate --n 11 --traj-len 3 --system hopf -o " + ws.file("x.csv"))
                  .exit_code,
              2);  // 11 not divisible by traj_len - 1
    EXPECT_EQ(run_cli(ws, "simulate").exit_code, 2);  // missing required flags
}

TEST(CliFit, MethodsProduceFilesAndReportDims) {
    Workspace ws;
    ASSERT_EQ(
        run_cli(ws, "simulate --system duffing --n 300 --seed 4 -o " + ws.file("d.csv")).exit_code,
        0);
    auto edmd =
        run_cli(ws, "fit --data " + ws.file("d.csv") + " --method edmd --degree 3 -o " +
                        ws.file("em"));
    ASSERT_EQ(edmd.exit_code, 0) << edmd.err;
    EXPECT_NE(edmd.out.find("fit_residual="), std::string::npos);
    EXPECT_TRUE(fs::exists(ws.file("em.model.json")));

    auto tssd_full = run_cli(ws, "fit --data " + ws.file("d.csv") +
                                     " --method tssd --epsilon 1.0 --degree 3 -o " +
                                     ws.file("t1"));
    ASSERT_EQ(tssd_full.exit_code, 0) << tssd_full.err;
    EXPECT_NE(tssd_full.out.find("dim=10"), std::string::npos);  // full degree-3 dictionary
    EXPECT_TRUE(fs::exists(ws.file("t1.trace.json")));
    EXPECT_TRUE(fs::exists(ws.file("t1.basis.json")));
}

TEST(CliFit, EpsilonZeroMatchesSsdSpan) {
    Workspace ws;
    ASSERT_EQ(
        run_cli(ws, "simulate --system hopf --n 400 --seed 6 -o " + ws.file("h.csv")).exit_code,
        0);
    auto zero = run_cli(ws, "fit --data " + ws.file("h.csv") +
                                " --method tssd --epsilon 0 --degree 4 -o " + ws.file("z"));
    ASSERT_EQ(zero.exit_code, 0) << zero.err;
    EXPECT_NE(zero.out.find("notice"), std::string::npos);
    auto ssd = run_cli(ws, "fit --data " + ws.file("h.csv") + " --method ssd --degree 4 -o " +
                               ws.file("s"));
    ASSERT_EQ(ssd.exit_code, 0) << ssd.err;
    auto b1 = koopman::coefficient_basis_from_json(koopman::io::load_json(ws.file("z.basis.json")));
    auto b2 = koopman::coefficient_basis_from_json(koopman::io::load_json(ws.file("s.basis.json")));
    EXPECT_LE(koopman::linalg::epsilon_apart_measure(b1.matrix, b2.matrix), 1e-8);
}

TEST(CliFit, ErrorPathsUseDocumentedExitCodes) {
    Workspace ws;
    EXPECT_EQ(run_cli(ws, "fit --data " + ws.file("missing.csv") + " --method edmd").exit_code,
              2);
    ASSERT_EQ(
        run_cli(ws, "simulate --system hopf --n 4 --traj-len 2 --seed 1 -o " + ws.file("tiny.csv"))
            .exit_code,
        0);
    // 4 snapshots cannot give a full-rank degree-3 evaluation (10 functions)
    EXPECT_EQ(run_cli(ws, "fit --data " + ws.file("tiny.csv") + " --method tssd --epsilon 0.5 "
                          "--degree 3 -o " +
                              ws.file("r"))
                  .exit_code,
              4);
    // tssd without epsilon
    EXPECT_EQ(run_cli(ws, "fit --data " + ws.file("tiny.csv") + " --method tssd --degree 1 -o " +
                              ws.file("r2"))
                  .exit_code,
              2);
}

TEST(CliSweep, ConfigRoundTripReproducesOutputsByteForByte) {
    Workspace ws;
    const std::string flags = "sweep --system hopf --epsilons 0.1,1.0 --degree 3 --n 200 "
                              "--seed 5 --test-seed 6 -o ";
    auto first = run_cli(ws, flags + ws.file("s1") + " --save-config " + ws.file("cfg.json"));
    ASSERT_EQ(first.exit_code, 0) << first.err;
    ASSERT_TRUE(fs::exists(ws.file("cfg.json")));
    auto second = run_cli(ws, "sweep --config " + ws.file("cfg.json") +
                                  " -o " + ws.file("s2"));
    ASSERT_EQ(second.exit_code, 0) << second.err;
    // every option comes from the config except the explicit -o
    EXPECT_EQ(slurp(ws.file("s1.csv")), slurp(ws.file("s2.csv")));
    EXPECT_EQ(slurp(ws.file("s1.json")), slurp(ws.file("s2.json")));
}

TEST(CliEvalAndEigfun, ReportErrorAndExportGrid) {
    Workspace ws;
    ASSERT_EQ(
        run_cli(ws, "simulate --system hopf --n 300 --seed 2 -o " + ws.file("h.csv")).exit_code,
        0);
    ASSERT_EQ(run_cli(ws, "simulate --system hopf --n 300 --seed 22 -o " + ws.file("htest.csv"))
                  .exit_code,
              0);
    ASSERT_EQ(run_cli(ws, "fit --data " + ws.file("h.csv") +
                              " --method tssd --epsilon 0.3 --degree 4 -o " + ws.file("m"))
                  .exit_code,
              0);
    auto eval = run_cli(ws, "eval --model " + ws.file("m.model.json") + " --test " +
                                ws.file("htest.csv"));
    ASSERT_EQ(eval.exit_code, 0) << eval.err;
    EXPECT_NE(eval.out.find("rrmse_max="), std::string::npos);

    auto eig = run_cli(ws, "eigfun --model " + ws.file("m.model.json") + " --idx 0 --grid 11 -o " +
                               ws.file("g.csv"));
    ASSERT_EQ(eig.exit_code, 0) << eig.err;
    const std::string grid = slurp(ws.file("g.csv"));
    EXPECT_NE(grid.find("x1,x2,abs,phase"), std::string::npos);
    // header comment + column header + 121 data rows
    EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 123);
    auto bad_idx = run_cli(ws, "eigfun --model " + ws.file("m.model.json") + " --idx 999 -o " +
                                   ws.file("g2.csv"));
    EXPECT_EQ(bad_idx.exit_code, 2);
}
