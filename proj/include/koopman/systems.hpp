#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

namespace koopman {

enum class SystemName { hopf, duffing, harmonic_consensus, linear_custom };

inline const char* to_string(SystemName name) {
    switch (name) {
        case SystemName::hopf: return "hopf";
        case SystemName::duffing: return "duffing";
        case SystemName::harmonic_consensus: return "harmonic_consensus";
        case SystemName::linear_custom: return "linear_custom";
    }
    return "unknown";
}

inline SystemName system_from_string(const std::string& s) {
    if (s == "hopf") return SystemName::hopf;
    if (s == "duffing") return SystemName::duffing;
    if (s == "harmonic_consensus" || s == "consensus") return SystemName::harmonic_consensus;
    if (s == "linear_custom" || s == "linear") return SystemName::linear_custom;
    throw ConfigError("unknown system name: " + s);
}

enum class Integrator { rk4, euler };

/// A benchmark vector field plus the sampling box and time step used to turn
/// it into a discrete-time snapshot source.
struct SystemSpec {
    SystemName name = SystemName::hopf;
    int state_dim = 2;
    Matrix adjacency;   // harmonic_consensus: a_ij weights
    Matrix linear_map;  // linear_custom: xdot = A x
    std::vector<std::array<double, 2>> domain;
    double dt = 0.01;
    Integrator integrator = Integrator::rk4;
    double safety_margin = 0.5;  // escape box inflation, as a fraction of box width

    static SystemSpec hopf() {
        SystemSpec s;
        s.name = SystemName::hopf;
        s.state_dim = 2;
        s.domain = {{-2.0, 2.0}, {-2.0, 2.0}};
        s.dt = 0.01;
        return s;
    }

    static SystemSpec duffing() {
        SystemSpec s;
        s.name = SystemName::duffing;
        s.state_dim = 2;
        s.domain = {{-2.0, 2.0}, {-2.0, 2.0}};
        s.dt = 0.02;
        return s;
    }

    /// Five agents on an undirected ring, states in [1, 5]^5.
    static SystemSpec harmonic_consensus() {
        SystemSpec s;
        s.name = SystemName::harmonic_consensus;
        s.state_dim = 5;
        s.adjacency = Matrix::Zero(5, 5);
        for (int i = 0; i < 5; ++i) {
            s.adjacency(i, (i + 1) % 5) = 1.0;
            s.adjacency((i + 1) % 5, i) = 1.0;
        }
        s.domain.assign(5, {1.0, 5.0});
        s.dt = 0.01;
        return s;
    }

    static SystemSpec linear(const Matrix& a, std::vector<std::array<double, 2>> box,
                             double dt_step) {
        if (a.rows() != a.cols()) throw ConfigError("linear system matrix must be square");
        if (static_cast<Index>(box.size()) != a.rows())
            throw ConfigError("linear system domain size must match the matrix");
        SystemSpec s;
        s.name = SystemName::linear_custom;
        s.state_dim = static_cast<int>(a.rows());
        s.linear_map = a;
        s.domain = std::move(box);
        s.dt = dt_step;
        return s;
    }

    void validate() const {
        if (state_dim < 1) throw ConfigError("system: state_dim must be >= 1");
        if (!(dt > 0.0)) throw ConfigError("system: dt must be positive");
        if (static_cast<int>(domain.size()) != state_dim)
            throw ConfigError("system: domain box must have one interval per coordinate");
        for (const auto& box : domain)
            if (!(box[0] < box[1])) throw ConfigError("system: empty domain interval");
    }
};

namespace detail {

inline std::string format_state(const Vector& x) {
    std::ostringstream os;
    os << "(";
    for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
    os << ")";
    return os.str();
}

}  // namespace detail

/// Harmonic mean of the state entries; requires every entry positive.
inline double harmonic_mean(const Vector& x) {
    double inv_sum = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) <= 0.0)
            throw TrajectoryEscapeError("harmonic mean undefined at state " +
                                        detail::format_state(x) + ": nonpositive entry");
        inv_sum += 1.0 / x(i);
    }
    return static_cast<double>(x.size()) / inv_sum;
}

inline Vector vector_field(const SystemSpec& spec, const Vector& x) {
    if (x.size() != spec.state_dim) throw InputError("vector_field: state dimension mismatch");
    Vector dx(x.size());
    switch (spec.name) {
        case SystemName::hopf: {
            const double r2 = x(0) * x(0) + x(1) * x(1);
            dx(0) = x(0) + 2.0 * x(1) - x(0) * r2;
            dx(1) = -2.0 * x(0) + x(1) - x(1) * r2;
            break;
        }
        case SystemName::duffing: {
            dx(0) = x(1);
            dx(1) = -0.5 * x(1) + x(0) * (1.0 - x(0) * x(0));
            break;
        }
        case SystemName::harmonic_consensus: {
            const double upsilon = harmonic_mean(x);
            const double n_a = static_cast<double>(x.size());
            for (Index i = 0; i < x.size(); ++i) {
                double coupling = 0.0;
                for (Index j = 0; j < x.size(); ++j)
                    coupling += spec.adjacency(i, j) * (x(j) - x(i));
                dx(i) = n_a * x(i) * x(i) / (upsilon * upsilon) * coupling;
            }
            break;
        }
        case SystemName::linear_custom: {
            dx = spec.linear_map * x;
            break;
        }
    }
    return dx;
}

/// One step of the discretized dynamics (classical 4th-order Runge-Kutta by
/// default, forward Euler when configured). Throws when the step leaves the
/// inflated safety box around the sampling domain.
inline Vector discrete_step(const SystemSpec& spec, const Vector& x) {
    Vector next(x.size());
    if (spec.integrator == Integrator::euler) {
        next = x + spec.dt * vector_field(spec, x);
    } else {
        const Vector k1 = vector_field(spec, x);
        const Vector k2 = vector_field(spec, Vector(x + 0.5 * spec.dt * k1));
        const Vector k3 = vector_field(spec, Vector(x + 0.5 * spec.dt * k2));
        const Vector k4 = vector_field(spec, Vector(x + spec.dt * k3));
        next = x + spec.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    for (int i = 0; i < spec.state_dim; ++i) {
        const double width = spec.domain[i][1] - spec.domain[i][0];
        const double lo = spec.domain[i][0] - spec.safety_margin * width;
        const double hi = spec.domain[i][1] + spec.safety_margin * width;
        if (!(next(i) >= lo && next(i) <= hi))
            throw TrajectoryEscapeError("trajectory escaped the safety box at state " +
                                        detail::format_state(next) + " (coordinate " +
                                        std::to_string(i + 1) + ")");
    }
    return next;
}

/// Paired snapshot matrices: row i of Y is the image of row i of X under one
/// discrete step.
struct SnapshotPair {
    Matrix X;
    Matrix Y;
};

namespace detail {

// Fixed uniform sampler: mt19937_64 output mapped through the top 53 bits.
// The distribution is pinned here (not delegated to std::uniform_real_
// distribution) so snapshot files are bit-identical across toolchains.
class UniformSampler {
  public:
    explicit UniformSampler(std::uint64_t seed) : engine_(seed) {}

    double in_unit_interval() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double in(double lo, double hi) { return lo + in_unit_interval() * (hi - lo); }

  private:
    std::mt19937_64 engine_;
};

}  // namespace detail

/// Draws trajectories of `traj_len` states with uniformly sampled initial
/// conditions and emits every consecutive pair. `n_pairs` must be divisible
/// by traj_len - 1. Deterministic per seed.
inline SnapshotPair sample_snapshots(const SystemSpec& spec, Index n_pairs, int traj_len,
                                     std::uint64_t seed) {
    spec.validate();
    if (n_pairs < 1) throw ConfigError("sample_snapshots: need at least one snapshot pair");
    if (traj_len < 2) throw ConfigError("sample_snapshots: traj_len must be >= 2");
    const Index pairs_per_traj = traj_len - 1;
    if (n_pairs % pairs_per_traj != 0)
        throw ConfigError("sample_snapshots: snapshot count " + std::to_string(n_pairs) +
                          " is not divisible by traj_len - 1 = " +
                          std::to_string(pairs_per_traj));
    const Index n_traj = n_pairs / pairs_per_traj;

    SnapshotPair out;
    out.X.resize(n_pairs, spec.state_dim);
    out.Y.resize(n_pairs, spec.state_dim);
    detail::UniformSampler sampler(seed);
    Index row = 0;
    for (Index t = 0; t < n_traj; ++t) {
        Vector x(spec.state_dim);
        for (int j = 0; j < spec.state_dim; ++j)
            x(j) = sampler.in(spec.domain[j][0], spec.domain[j][1]);
        for (Index k = 0; k < pairs_per_traj; ++k) {
            Vector y;
            try {
                y = discrete_step(spec, x);
            } catch (const TrajectoryEscapeError& err) {
                throw TrajectoryEscapeError(std::string(err.what()) +
                                            "; trajectory started at " +
                                            detail::format_state(x));
            }
            out.X.row(row) = x.transpose();
            out.Y.row(row) = y.transpose();
            ++row;
            x = y;
        }
    }
    return out;
}

}  // namespace koopman
