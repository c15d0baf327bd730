/**
 * @file properties.hpp
 * @brief Self-checks that need no table runs: Kalman identities, the
 *        D_N eigenvalue formula, the f_T normalization, per-step energy
 *        decay and linearity of the control in the initial data.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plate_nc/control.hpp"
#include "plate_nc/fdm.hpp"
#include "plate_nc/fem.hpp"

namespace plate_nc::properties {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {
inline std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << x;
    return s.str();
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> dist;
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = dist(rng);
    return x;
}
}  // namespace detail

inline PropertyResult kalman_identity_fdm(double rho = 2.5, int max_n = 8) {
    double worst = 0.0;
    bool rank_ok = true;
    for (int n = 2; n <= max_n; ++n) {
        const auto d = fdm::kalman_check_fdm(fdm::FdGrid(n, M_PI), rho);
        worst = std::max(worst, d.identity_error);
        rank_ok = rank_ok && d.full_rank();
    }
    return {"kalman identity (fdm)", worst <= 1e-10 && rank_ok,
            "max |K K^-1 - I| = " + detail::fmt(worst) + (rank_ok ? ", full rank" : ", RANK DEFICIENT")};
}

inline PropertyResult kalman_identity_fem(double rho = 2.5, int max_n = 8) {
    double worst = 0.0;
    bool rank_ok = true;
    for (int n = 2; n <= max_n; ++n) {
        const fem::FemSpace space(fem::build_structured_mesh(n, M_PI));
        const auto d = fem::kalman_check_fem(space, rho);
        worst = std::max(worst, d.identity_error);
        rank_ok = rank_ok && d.full_rank();
    }
    return {"kalman identity (fem)", worst <= 1e-10 && rank_ok,
            "max |K K^-1 - I| = " + detail::fmt(worst) + (rank_ok ? ", full rank" : ", RANK DEFICIENT")};
}

/// Closed-form eigenvalues against a dense symmetric eigensolve.
inline PropertyResult dn_eigenvalues_match_dense(int max_n = 8) {
    double worst = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        const fdm::FdGrid g(n, M_PI);
        const Eigen::MatrixXd d = Eigen::MatrixXd(fdm::build_dn(g).matrix());
        Eigen::VectorXd dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d, Eigen::EigenvaluesOnly).eigenvalues();
        std::vector<double> closed;
        for (int j = 1; j <= n; ++j)
            for (int i = 1; i <= n; ++i) closed.push_back(fdm::dn_eigenvalue(i, j, g));
        std::sort(closed.begin(), closed.end());
        for (std::size_t k = 0; k < closed.size(); ++k)
            worst = std::max(worst, std::abs(closed[k] - dense[static_cast<Eigen::Index>(k)]) / dense.maxCoeff());
    }
    return {"D_N eigenvalue formula vs dense eigensolve", worst <= 1e-10,
            "max relative deviation = " + detail::fmt(worst)};
}

/// lambda_{1,1}(n) increases towards 2 pi^2 / a^2 and sits within h^2 of it
/// at n = 64 (a = pi, so the limit is 2).
inline PropertyResult lambda11_trend() {
    const int ns[] = {4, 8, 16, 32, 64};
    double prev = 0.0;
    bool monotone = true;
    double last_gap = 0.0, last_h = 0.0;
    for (int n : ns) {
        const fdm::FdGrid g(n, M_PI);
        const double l = fdm::dn_eigenvalue(1, 1, g);
        if (!(l > prev) || !(l < 2.0)) monotone = false;
        prev = l;
        last_gap = 2.0 - l;
        last_h = g.h;
    }
    const bool ok = monotone && last_gap <= last_h * last_h;
    return {"lambda_11 -> 2 pi^2/a^2", ok,
            "gap at n=64 = " + detail::fmt(last_gap) + " (h^2 = " + detail::fmt(last_h * last_h) + ")"};
}

/// Composite Simpson is exact for the quadratic f_T; the residual is roundoff.
inline PropertyResult f_weight_normalization() {
    double worst = 0.0;
    for (double T : {1.0 / 512.0, 0.0625, 1.0, 2.0, 64.0}) {
        const int intervals = 2000;
        const double h = T / intervals;
        double acc = control::f_weight(0.0, T) + control::f_weight(T, T);
        for (int k = 1; k < intervals; ++k) acc += (k % 2 ? 4.0 : 2.0) * control::f_weight(k * h, T);
        worst = std::max(worst, std::abs(acc * h / 3.0 - 1.0));
    }
    return {"integral of f_T equals 1", worst <= 1e-12, "max |int f_T - 1| = " + detail::fmt(worst)};
}

/// Homogeneous steps never increase the scheme energy.
inline PropertyResult energy_monotonicity(int trials = 100, unsigned seed = 12345) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_n(2, 8);
    std::uniform_real_distribution<double> pick_dt(0.01, 0.39);
    int violations = 0;
    double worst = -INFINITY;
    for (int k = 0; k < trials; ++k) {
        const int n = pick_n(rng);
        const double dt = pick_dt(rng);
        {
            const fdm::FdmScheme s(fdm::FdGrid(n, M_PI), 2.5, dt);
            StatePair x{detail::random_vector(rng, s.dim()), detail::random_vector(rng, s.dim())};
            const double before = energy(x, s.norm());
            const double after = energy(s.homogeneous_step(x), s.norm());
            worst = std::max(worst, (after - before) / before);
            if (after > before * (1.0 + 1e-14)) ++violations;
        }
        {
            auto space = std::make_shared<const fem::FemSpace>(fem::build_structured_mesh(n, M_PI));
            const fem::FemScheme s(space, 2.5, dt);
            StatePair x{detail::random_vector(rng, s.dim()), detail::random_vector(rng, s.dim())};
            const double before = energy(x, s.norm());
            const double after = energy(s.homogeneous_step(x), s.norm());
            worst = std::max(worst, (after - before) / before);
            if (after > before * (1.0 + 1e-14)) ++violations;
        }
    }
    return {"per-step energy decay (fdm and fem)", violations == 0,
            std::to_string(violations) + " violations in " + std::to_string(2 * trials) +
                " steps, max relative change = " + detail::fmt(worst)};
}

/// Doubling (v0, w0) doubles every control vector.
inline PropertyResult control_linearity(unsigned seed = 777) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    auto compare = [&worst](const NullControlRun& a, const NullControlRun& b) {
        for (std::size_t j = 0; j < a.controls.controls.size(); ++j) {
            const Vector& ua = a.controls.controls[j];
            const Vector& ub = b.controls.controls[j];
            const double scale = std::max(1.0, ua.cwiseAbs().maxCoeff());
            worst = std::max(worst, (ub - 2.0 * ua).cwiseAbs().maxCoeff() / scale);
        }
    };
    for (int n : {2, 4, 8}) {
        const double T = 0.8, dt = 0.1;
        {
            const fdm::FdmScheme s(fdm::FdGrid(n, M_PI), 2.5, dt);
            StatePair x{detail::random_vector(rng, s.dim()), detail::random_vector(rng, s.dim())};
            StatePair x2{2.0 * x.v, 2.0 * x.w};
            compare(run_null_control(s, x, T), run_null_control(s, x2, T));
        }
        {
            auto space = std::make_shared<const fem::FemSpace>(fem::build_structured_mesh(n, M_PI));
            const fem::FemScheme s(space, 2.5, dt);
            StatePair x{detail::random_vector(rng, s.dim()), detail::random_vector(rng, s.dim())};
            StatePair x2{2.0 * x.v, 2.0 * x.w};
            compare(run_null_control(s, x, T), run_null_control(s, x2, T));
        }
    }
    return {"control linear in initial data", worst <= 1e-10, "max deviation = " + detail::fmt(worst)};
}

inline std::vector<PropertyResult> run_property_suite() {
    return {kalman_identity_fdm(),  kalman_identity_fem(), dn_eigenvalues_match_dense(), lambda11_trend(),
            f_weight_normalization(), energy_monotonicity(), control_linearity()};
}

}  // namespace plate_nc::properties
