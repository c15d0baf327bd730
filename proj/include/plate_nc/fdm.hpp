/**
 * @file fdm.hpp
 * @brief Five-point finite-difference scheme on the square (0,a)^2 with
 *        homogeneous Dirichlet data: grid, the Laplacian block matrix D_N,
 *        implicit Euler stepping and the steering control.
 */
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "plate_nc/control.hpp"
#include "plate_nc/core.hpp"
#include "plate_nc/linalg.hpp"
#include "plate_nc/null_control.hpp"

namespace plate_nc::fdm {

using Field = std::function<double(double, double)>;

/// Interior points (x_i, y_j) = (i h, j h), 1 <= i, j <= n, h = a/(n+1).
/// Unknowns are ordered with i running fastest inside the block for row j.
struct FdGrid {
    int n = 0;
    double a = 0.0;
    double h = 0.0;

    FdGrid(int n_in, double a_in) : n(n_in), a(a_in), h(a_in / (n_in + 1)) {
        if (n < 1) throw ConfigError("FdGrid: n must be positive");
        if (!(a > 0.0)) throw ConfigError("FdGrid: side length must be positive");
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(n) * n; }
    Eigen::Index index(int i, int j) const {
        return static_cast<Eigen::Index>(j - 1) * n + (i - 1);
    }
    double x(int i) const { return i * h; }
    double y(int j) const { return j * h; }
};

/// D_N = h^{-2} * (block tridiagonal with F_n = tridiag(-1, 4, -1) on the
/// diagonal and -I_n off the diagonal).
inline SparseSpdMatrix build_dn(const FdGrid& g) {
    const double s = 1.0 / (g.h * g.h);
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(5 * g.size()));
    for (int j = 1; j <= g.n; ++j) {
        for (int i = 1; i <= g.n; ++i) {
            const auto k = g.index(i, j);
            t.emplace_back(k, k, 4.0 * s);
            if (i > 1) t.emplace_back(k, g.index(i - 1, j), -s);
            if (i < g.n) t.emplace_back(k, g.index(i + 1, j), -s);
            if (j > 1) t.emplace_back(k, g.index(i, j - 1), -s);
            if (j < g.n) t.emplace_back(k, g.index(i, j + 1), -s);
        }
    }
    SparseMatrix d(g.size(), g.size());
    d.setFromTriplets(t.begin(), t.end());
    return SparseSpdMatrix(std::move(d));
}

/// lambda_{i,j} = h^{-2} (4 - 2 cos(i pi/(n+1)) - 2 cos(j pi/(n+1))).
inline double dn_eigenvalue(int i, int j, const FdGrid& g) {
    if (i < 1 || i > g.n || j < 1 || j > g.n) throw std::out_of_range("dn_eigenvalue: index out of range");
    const double c = M_PI / (g.n + 1);
    return (4.0 - 2.0 * (std::cos(i * c) + std::cos(j * c))) / (g.h * g.h);
}

inline Vector sample_on_grid(const Field& f, const FdGrid& g) {
    Vector out(g.size());
    for (int j = 1; j <= g.n; ++j)
        for (int i = 1; i <= g.n; ++i) out[g.index(i, j)] = f(g.x(i), g.y(j));
    return out;
}

enum class NormKind {
    euclidean,  ///< plain R^N norm
    weighted,   ///< h^2-weighted discrete L^2 norm
};

/// One implicit Euler step for (v, w)' = (D w, -D(v + rho w) + u):
///
///     [ I       -dt D        ] [v+]   [v        ]
///     [ dt D    I + rho dt D ] [w+] = [w + dt u ]
///
/// The step matrix is factored once; D_N is factored once for mu_1'.
class FdmScheme {
public:
    FdmScheme(FdGrid grid, double rho, double dt, NormKind norm = NormKind::euclidean)
        : grid_(grid), rho_(rho), dt_(dt), norm_kind_(norm), dn_(build_dn(grid)) {
        if (!(dt > 0.0)) throw ConfigError("FdmScheme: dt must be positive");
        if (!(rho > 0.0)) throw ConfigError("FdmScheme: rho must be positive");
        const auto& d = dn_.matrix();
        SparseMatrix id(d.rows(), d.cols());
        id.setIdentity();
        step_ = std::make_shared<BlockSolver2x2>(id, SparseMatrix(-dt * d), SparseMatrix(dt * d),
                                                 SparseMatrix(id + rho * dt * d));
        dn_solver_ = std::make_shared<SpdSolver>(dn_);
    }

    const FdGrid& grid() const { return grid_; }
    const SparseSpdMatrix& dn() const { return dn_; }
    const BlockSolver2x2& step_solver() const { return *step_; }
    Eigen::Index dim() const { return grid_.size(); }
    double dt() const { return dt_; }
    double rho() const { return rho_; }

    NormWeight norm() const {
        if (norm_kind_ == NormKind::euclidean) return NormWeight::euclidean();
        const double w = grid_.h * grid_.h;
        return {[w](const Vector& x) -> Vector { return w * x; }, dim()};
    }

    StatePair homogeneous_step(const StatePair& s) const {
        check(s);
        auto [v, w] = step_->solve(s.v, s.w);
        return {std::move(v), std::move(w)};
    }

    StatePair controlled_step(const StatePair& s, const Vector& u) const {
        check(s);
        if (u.size() != dim()) throw std::invalid_argument("controlled_step: control has wrong length");
        auto [v, w] = step_->solve(s.v, s.w + dt_ * u);
        return {std::move(v), std::move(w)};
    }

    /// u^{j+1} = mu_0 + mu_1' with D_N mu_1' = -G.
    Vector control_at_step(const Vector& vh_next2, const Vector& vh_next, const Vector& wh_next,
                           double t_next, double T) const {
        Vector mu0 = control::mu_zero(vh_next, wh_next, rho_, t_next, T);
        const Vector g = control::g_vector(vh_next2, vh_next, dt_, t_next, T);
        return mu0 - dn_solver_->solve(g);
    }

private:
    void check(const StatePair& s) const {
        if (s.v.size() != dim() || s.w.size() != dim())
            throw std::invalid_argument("FdmScheme: state has wrong dimension");
    }

    FdGrid grid_;
    double rho_;
    double dt_;
    NormKind norm_kind_;
    SparseSpdMatrix dn_;
    std::shared_ptr<BlockSolver2x2> step_;
    std::shared_ptr<SpdSolver> dn_solver_;
};

inline StatePair fdm_homogeneous_step(const StatePair& s, double dt, double rho, const FdGrid& g) {
    return FdmScheme(g, rho, dt).homogeneous_step(s);
}

inline StatePair fdm_controlled_step(const StatePair& s, const Vector& u, double dt, double rho,
                                     const FdGrid& g) {
    return FdmScheme(g, rho, dt).controlled_step(s, u);
}

inline Vector fdm_control_at_step(const Vector& vh_next2, const Vector& vh_next,
                                  const Vector& wh_next, double t_next, double dt, double T,
                                  double rho, const FdGrid& g) {
    return FdmScheme(g, rho, dt).control_at_step(vh_next2, vh_next, wh_next, t_next, T);
}

/// Full steering run on the grid of `p` with initial data sampled from
/// (v0, w0).
inline NullControlRun run_fdm_null_control(const PlateParams& p, const Field& v0, const Field& w0,
                                           NormKind norm = NormKind::euclidean) {
    p.validate();
    const FdGrid grid(p.n, p.side);
    const FdmScheme scheme(grid, p.rho, p.dt(), norm);
    auto run = run_null_control(scheme, {sample_on_grid(v0, grid), sample_on_grid(w0, grid)}, p.T);
    if (!p.dt_below_inverse_rho()) run.warnings.emplace_back("dt >= 1/rho");
    return run;
}

struct KalmanDiagnostic {
    double identity_error = 0.0;  ///< max |K K^{-1} - I|
    Eigen::Index rank = 0;
    Eigen::Index expected_rank = 0;
    double inverse_norm = 0.0;      ///< ||D_N^{-1}||_2 from a dense eigensolve
    double predicted_inverse_norm = 0.0;  ///< 1 / lambda_{1,1}

    bool full_rank() const { return rank == expected_rank; }
    bool passes(double tol = 1e-10) const { return identity_error <= tol && full_rank(); }
};

/// Dense check of K = [B, A B] = [[0, D], [I, -rho D]] against the closed
/// form K^{-1} = [[rho I, I], [D^{-1}, 0]]. Meant for small n.
inline KalmanDiagnostic kalman_check_fdm(const FdGrid& g, double rho) {
    if (g.n > 24) throw ConfigError("kalman_check_fdm: dense check limited to n <= 24");
    const Eigen::Index n = g.size();
    const Eigen::MatrixXd d = Eigen::MatrixXd(build_dn(g).matrix());
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd dinv = d.llt().solve(id);

    Eigen::MatrixXd k(2 * n, 2 * n), kinv(2 * n, 2 * n);
    k << Eigen::MatrixXd::Zero(n, n), d, id, -rho * d;
    kinv << rho * id, id, dinv, Eigen::MatrixXd::Zero(n, n);

    KalmanDiagnostic out;
    out.identity_error = (k * kinv - Eigen::MatrixXd::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff();
    out.rank = Eigen::FullPivLU<Eigen::MatrixXd>(k).rank();
    out.expected_rank = 2 * n;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d, Eigen::EigenvaluesOnly);
    out.inverse_norm = 1.0 / eig.eigenvalues().minCoeff();
    out.predicted_inverse_norm = 1.0 / dn_eigenvalue(1, 1, g);
    return out;
}

}  // namespace plate_nc::fdm
