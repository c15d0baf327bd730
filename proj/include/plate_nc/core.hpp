/**
 * @file core.hpp
 * @brief Configuration, state, time grid and report types shared by the
 *        finite-difference and finite-element null-control schemes.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace plate_nc {

using Vector = Eigen::VectorXd;

/// Invalid user configuration (bad T, m, rho, resolution, table layout...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear solve failed or missed its residual bound.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Physical and discretization parameters of one run.
struct PlateParams {
    double rho = 2.5;          ///< damping coefficient, > 0 and != 2
    double side = M_PI;        ///< domain is (0, side)^2
    double T = 1.0;            ///< terminal time
    int steps = 2;             ///< number of time steps m
    int n = 2;                 ///< interior resolution per axis

    double dt() const { return T / static_cast<double>(steps); }

    void validate() const {
        if (!(rho > 0.0) || rho == 2.0)
            throw ConfigError("rho must be positive and different from 2");
        if (!(side > 0.0)) throw ConfigError("domain side must be positive");
        if (!(T > 0.0)) throw ConfigError("terminal time must be positive");
        if (steps < 2) throw ConfigError("at least two time steps are required");
        if (n < 2) throw ConfigError("resolution n must be at least 2");
    }

    /// Implicit steps are contractive for any dt; the FEM scheme is only
    /// guaranteed uniquely solvable for dt < 1/rho.
    bool dt_below_inverse_rho() const { return dt() < 1.0 / rho; }
};

/// Uniform grid t_j = j*dt, j = 0..m.
class TimeGrid {
public:
    TimeGrid(double T, int m) : T_(T), m_(m) {
        if (!(T > 0.0)) throw ConfigError("TimeGrid: T must be positive");
        if (m < 2) throw ConfigError("TimeGrid: m must be >= 2");
        dt_ = T / static_cast<double>(m);
    }

    double dt() const { return dt_; }
    double final_time() const { return T_; }
    int steps() const { return m_; }
    std::size_t size() const { return static_cast<std::size_t>(m_) + 1; }

    /// t_j; the last node is pinned to T.
    double operator[](std::size_t j) const {
        return j == static_cast<std::size_t>(m_) ? T_ : static_cast<double>(j) * dt_;
    }

    std::vector<double> nodes() const {
        std::vector<double> t(size());
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = (*this)[j];
        return t;
    }

private:
    double T_;
    int m_;
    double dt_;
};

inline TimeGrid make_time_grid(double T, int m) { return TimeGrid(T, m); }

/// Coefficient vectors (v, w) at one time level.
struct StatePair {
    Vector v;
    Vector w;

    StatePair() = default;
    StatePair(Vector v_in, Vector w_in) : v(std::move(v_in)), w(std::move(w_in)) {
        if (v.size() != w.size())
            throw std::invalid_argument("StatePair: v and w must have equal length");
    }
    static StatePair zero(Eigen::Index n) { return {Vector::Zero(n), Vector::Zero(n)}; }

    Eigen::Index size() const { return v.size(); }
};

/// Inner-product weight used to measure states and controls. An empty
/// weight means the Euclidean norm on R^N; otherwise `apply(x)` returns
/// W*x for a symmetric positive definite W (e.g. a mass matrix).
struct NormWeight {
    std::function<Vector(const Vector&)> apply;
    Eigen::Index dim = -1;  ///< -1 accepts any length (Euclidean)

    static NormWeight euclidean() { return {}; }
    static NormWeight diagonal(Vector weights) {
        const Eigen::Index n = weights.size();
        return {[weights = std::move(weights)](const Vector& x) -> Vector {
                    return weights.cwiseProduct(x);
                },
                n};
    }

    double squared(const Vector& x) const {
        if (dim >= 0 && x.size() != dim)
            throw std::invalid_argument("norm weight dimension mismatch");
        if (!apply) return x.squaredNorm();
        return x.dot(apply(x));
    }
};

/// ||v||^2 + ||w||^2 in the given norm (not halved).
inline double energy(const StatePair& s, const NormWeight& norm = NormWeight::euclidean()) {
    if (s.v.size() != s.w.size())
        throw std::invalid_argument("energy: v and w have different lengths");
    return norm.squared(s.v) + norm.squared(s.w);
}

/// Controls u^{j+1}, j = 0..m-1, on their time grid.
struct ControlTrajectory {
    std::vector<Vector> controls;
    TimeGrid grid;

    explicit ControlTrajectory(TimeGrid g) : grid(g) {
        controls.reserve(static_cast<std::size_t>(g.steps()));
    }

    /// (dt * sum_j ||u^{j+1}||^2)^{1/2}: right-endpoint rule in time.
    double l2_norm(const NormWeight& norm = NormWeight::euclidean()) const {
        double acc = 0.0;
        for (const auto& u : controls) acc += norm.squared(u);
        return std::sqrt(grid.dt() * acc);
    }
};

struct RunReport {
    double terminal_energy = 0.0;
    double control_norm = 0.0;
    double T = 0.0;
    double dt = 0.0;
    Eigen::Index N = 0;
};

/// rate_k = log2(values_k / values_{k+1}) for a sequence taken at doubling T.
inline std::vector<double> rate_sequence(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("rate_sequence: need at least two values");
    std::vector<double> rates;
    rates.reserve(values.size() - 1);
    for (double v : values)
        if (!(v > 0.0)) throw std::invalid_argument("rate_sequence: values must be positive");
    for (std::size_t k = 0; k + 1 < values.size(); ++k)
        rates.push_back(std::log2(values[k] / values[k + 1]));
    return rates;
}

}  // namespace plate_nc
