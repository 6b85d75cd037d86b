#include "koopman/systems.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

using koopman::ConfigError;
using koopman::Matrix;
using koopman::SnapshotPair;
using koopman::SystemSpec;
using koopman::TrajectoryEscapeError;
using koopman::Vector;

namespace {

Vector state2(double a, double b) {
    Vector x(2);
    x << a, b;
    return x;
}

// closed-form exp(A t) for a diagonalizable 2x2, used as the step oracle
Matrix expm_2x2(const Matrix& a, double t) {
    Eigen::EigenSolver<Matrix> es(a);
    Eigen::MatrixXcd v = es.eigenvectors();
    Eigen::VectorXcd lam = es.eigenvalues();
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
    d(0, 0) = std::exp(lam(0) * t);
    d(1, 1) = std::exp(lam(1) * t);
    return (v * d * v.inverse()).real();
}

}  // namespace

TEST(VectorField, HopfEquilibriumAtOrigin) {
    EXPECT_LT(koopman::vector_field(SystemSpec::hopf(), state2(0, 0)).norm(), 1e-15);
}

TEST(VectorField, DuffingEquilibria) {
    SystemSpec spec = SystemSpec::duffing();
    EXPECT_LT(koopman::vector_field(spec, state2(0, 0)).norm(), 1e-15);
    EXPECT_LT(koopman::vector_field(spec, state2(1, 0)).norm(), 1e-15);
    EXPECT_LT(koopman::vector_field(spec, state2(-1, 0)).norm(), 1e-15);
}

TEST(VectorField, ConsensusVanishesAtAgreement) {
    SystemSpec spec = SystemSpec::harmonic_consensus();
    Vector x = Vector::Constant(5, 3.7);
    EXPECT_LT(koopman::vector_field(spec, x).norm(), 1e-12);
}

TEST(VectorField, ConsensusRejectsNonpositiveStates) {
    SystemSpec spec = SystemSpec::harmonic_consensus();
    Vector x = Vector::Constant(5, 2.0);
    x(3) = -0.5;
    EXPECT_THROW(koopman::vector_field(spec, x), TrajectoryEscapeError);
}

TEST(DiscreteStep, ZeroFieldIsIdentity) {
    SystemSpec spec = SystemSpec::linear(Matrix::Zero(2, 2), {{-1.0, 1.0}, {-1.0, 1.0}}, 0.05);
    Vector x = state2(0.3, -0.4);
    EXPECT_TRUE(koopman::discrete_step(spec, x).isApprox(x));
}

TEST(DiscreteStep, MatchesMatrixExponentialOracle) {
    Matrix a(2, 2);
    a << -0.3, 0.2, 0.1, -0.4;
    SystemSpec spec = SystemSpec::linear(a, {{-1.0, 1.0}, {-1.0, 1.0}}, 0.05);
    Vector x = state2(0.5, -0.2);
    Vector exact = expm_2x2(a, spec.dt) * x;
    EXPECT_LT((koopman::discrete_step(spec, x) - exact).norm(), std::pow(spec.dt, 5));
}

TEST(DiscreteStep, DuffingFixedPointStays) {
    SystemSpec spec = SystemSpec::duffing();
    Vector x = state2(1, 0);
    EXPECT_TRUE(koopman::discrete_step(spec, x).isApprox(x, 1e-14));
}

TEST(DiscreteStep, FourthOrderConvergence) {
    SystemSpec spec = SystemSpec::hopf();
    Vector x = state2(0.8, -0.6);

    auto roll = [&](double dt, int steps) {
        SystemSpec s = spec;
        s.dt = dt;
        Vector cur = x;
        for (int i = 0; i < steps; ++i) cur = koopman::discrete_step(s, cur);
        return cur;
    };
    const double h = 0.1;
    Vector reference = roll(h / 100.0, 100);  // fine-step reference over horizon h
    const double err_h = (roll(h, 1) - reference).norm();
    const double err_h2 = (roll(h / 2.0, 2) - reference).norm();
    EXPECT_GT(err_h / err_h2, 12.0);
    EXPECT_LT(err_h / err_h2, 22.0);
}

TEST(DiscreteStep, EulerOptionDiffersAtSecondOrder) {
    SystemSpec euler = SystemSpec::hopf();
    euler.integrator = koopman::Integrator::euler;
    SystemSpec rk = SystemSpec::hopf();
    Vector x = state2(0.5, 0.5);
    const double gap = (koopman::discrete_step(euler, x) - koopman::discrete_step(rk, x)).norm();
    EXPECT_LT(gap, 1e-3);
    EXPECT_GT(gap, 1e-8);
}

TEST(DiscreteStep, EscapeRaisesWithState) {
    SystemSpec spec = SystemSpec::hopf();
    spec.dt = 10.0;  // giant step flings the state out of the safety box
    try {
        koopman::discrete_step(spec, state2(1.9, 1.9));
        FAIL() << "expected escape";
    } catch (const TrajectoryEscapeError& err) {
        EXPECT_NE(std::string(err.what()).find("("), std::string::npos);
    }
}

TEST(SampleSnapshots, SinglePairMatchesOneStep) {
    SystemSpec spec = SystemSpec::duffing();
    SnapshotPair p = koopman::sample_snapshots(spec, 1, 2, 5);
    ASSERT_EQ(p.X.rows(), 1);
    Vector y = koopman::discrete_step(spec, Vector(p.X.row(0).transpose()));
    EXPECT_TRUE(p.Y.row(0).transpose().isApprox(y));
}

TEST(SampleSnapshots, ShapesAndChainStructure) {
    SystemSpec spec = SystemSpec::hopf();
    SnapshotPair p = koopman::sample_snapshots(spec, 100, 3, 11);
    EXPECT_EQ(p.X.rows(), 100);
    EXPECT_EQ(p.X.cols(), 2);
    // trajectories of 3 states contribute two chained pairs
    for (int t = 0; t < 50; ++t)
        EXPECT_TRUE(p.Y.row(2 * t).isApprox(p.X.row(2 * t + 1)));
}

TEST(SampleSnapshots, ConsensusShapesAndPositivity) {
    SystemSpec spec = SystemSpec::harmonic_consensus();
    SnapshotPair p = koopman::sample_snapshots(spec, 400, 3, 13);
    EXPECT_EQ(p.X.cols(), 5);
    EXPECT_GT(p.X.minCoeff(), 0.0);
    EXPECT_GT(p.Y.minCoeff(), 0.0);
}

TEST(SampleSnapshots, DivisibilityPrecondition) {
    SystemSpec spec = SystemSpec::hopf();
    EXPECT_THROW(koopman::sample_snapshots(spec, 101, 3, 1), ConfigError);
    EXPECT_NO_THROW(koopman::sample_snapshots(spec, 101, 2, 1));
}

TEST(SampleSnapshots, DeterministicPerSeed) {
    SystemSpec spec = SystemSpec::duffing();
    SnapshotPair a = koopman::sample_snapshots(spec, 50, 3, 17);
    SnapshotPair b = koopman::sample_snapshots(spec, 50, 3, 17);
    SnapshotPair c = koopman::sample_snapshots(spec, 50, 3, 18);
    EXPECT_TRUE((a.X.array() == b.X.array()).all());
    EXPECT_TRUE((a.Y.array() == b.Y.array()).all());
    EXPECT_FALSE((a.X.array() == c.X.array()).all());
}

TEST(Trajectories, HopfApproachesUnitCircle) {
    SystemSpec spec = SystemSpec::hopf();
    Vector x = state2(0.1, 0.1);
    double initial_gap = std::abs(x.norm() - 1.0);
    for (int i = 0; i < 2000; ++i) x = koopman::discrete_step(spec, x);
    EXPECT_LT(std::abs(x.norm() - 1.0), 0.05 * initial_gap);
}

TEST(Trajectories, ConsensusReachesHarmonicMeanOfStart) {
    SystemSpec spec = SystemSpec::harmonic_consensus();
    Vector x(5);
    x << 1.5, 2.0, 3.0, 4.0, 4.5;
    const double target = koopman::harmonic_mean(x);
    for (int i = 0; i < 20000; ++i) x = koopman::discrete_step(spec, x);
    EXPECT_LT(x.maxCoeff() - x.minCoeff(), 1e-3);
    EXPECT_NEAR(x.mean(), target, 1e-2);
    EXPECT_NEAR(koopman::harmonic_mean(x), target, 1e-4);  // conserved up to integrator drift
}
