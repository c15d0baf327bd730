/**
 * @file spectral.hpp
 * @brief Closed-form solution of the uncontrolled system by expansion in
 *        Dirichlet Laplacian eigenfunctions of (0,a)^2. Valid for rho > 2,
 *        where each mode decays with two real rates.
 */
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace plate_nc::spectral {

/// One eigenmode (2/a) sin(m pi x/a) sin(n pi y/a) with eigenvalue
/// (m^2 + n^2) pi^2 / a^2 and initial coefficients (alpha0, beta0).
struct Mode {
    int m = 1;
    int n = 1;
    double lambda = 2.0;
    double alpha0 = 0.0;
    double beta0 = 0.0;
    double side = M_PI;

    static Mode make(int m, int n, double alpha0, double beta0, double side = M_PI) {
        if (m < 1 || n < 1) throw std::invalid_argument("Mode: wave numbers must be positive");
        if (!(side > 0.0)) throw std::invalid_argument("Mode: side must be positive");
        const double k = M_PI / side;
        return {m, n, (m * m + n * n) * k * k, alpha0, beta0, side};
    }

    double eigenfunction(double x, double y) const {
        const double k = M_PI / side;
        return (2.0 / side) * std::sin(m * k * x) * std::sin(n * k * y);
    }
};

namespace detail {
inline double discriminant_root(double rho) {
    if (!(rho > 2.0)) throw std::domain_error("spectral oracle requires rho > 2");
    return std::sqrt(rho * rho - 4.0);
}
}  // namespace detail

/// Eigenvalues of [[0, lambda], [-lambda, -rho lambda]]:
/// eta1 = -(lambda/2)(rho + r), eta2 = -(lambda/2)(rho - r), r = sqrt(rho^2 - 4).
inline std::pair<double, double> modal_rates(double lambda, double rho) {
    if (!(lambda > 0.0)) throw std::invalid_argument("modal_rates: lambda must be positive");
    const double r = detail::discriminant_root(rho);
    return {-0.5 * lambda * (rho + r), -0.5 * lambda * (rho - r)};
}

/// Similarity matrix with eigenvector columns (-rho/2 +- r/2, 1).
struct Similarity {
    double s11, s12, s21, s22;

    static Similarity for_rho(double rho) {
        const double r = detail::discriminant_root(rho);
        return {-0.5 * rho + 0.5 * r, -0.5 * rho - 0.5 * r, 1.0, 1.0};
    }

    std::pair<double, double> apply(double c1, double c2) const {
        return {s11 * c1 + s12 * c2, s21 * c1 + s22 * c2};
    }
};

/// (c1, c2) = S^{-1} (alpha0, beta0).
inline std::pair<double, double> modal_constants(double alpha0, double beta0, double rho) {
    const double r = detail::discriminant_root(rho);
    return {(alpha0 + 0.5 * beta0 * (rho + r)) / r, (-alpha0 - 0.5 * beta0 * (rho - r)) / r};
}

struct ModalEvolution {
    double eta1, eta2;
    double c1, c2;
    Similarity similarity;
};

inline ModalEvolution modal_evolution(const Mode& mode, double rho) {
    const auto [eta1, eta2] = modal_rates(mode.lambda, rho);
    const auto [c1, c2] = modal_constants(mode.alpha0, mode.beta0, rho);
    return {eta1, eta2, c1, c2, Similarity::for_rho(rho)};
}

/// (alpha(t), beta(t)) = S (c1 e^{eta1 t}, c2 e^{eta2 t}).
inline std::pair<double, double> modal_evolve(const Mode& mode, double rho, double t) {
    if (t < 0.0) throw std::invalid_argument("modal_evolve: t must be nonnegative");
    const auto ev = modal_evolution(mode, rho);
    return ev.similarity.apply(ev.c1 * std::exp(ev.eta1 * t), ev.c2 * std::exp(ev.eta2 * t));
}

/// Solution for rho = 5/2 on (0, pi)^2 with v0 = 0, w0 = (3/2) sin 2x sin 2y.
inline std::pair<double, double> exact_test_solution(double x, double y, double t) {
    const double shape = std::sin(2.0 * x) * std::sin(2.0 * y);
    const double e4 = std::exp(-4.0 * t), e16 = std::exp(-16.0 * t);
    return {(e4 - e16) * shape, (2.0 * e16 - 0.5 * e4) * shape};
}

/// Truncated eigenfunction expansion sum_i (alpha_i(t), beta_i(t)) phi_i(x, y).
inline std::pair<double, double> evaluate_modal_sum(const std::vector<Mode>& modes, double rho,
                                                    double x, double y, double t) {
    double v = 0.0, w = 0.0;
    for (const auto& mode : modes) {
        const auto [alpha, beta] = modal_evolve(mode, rho, t);
        const double phi = mode.eigenfunction(x, y);
        v += alpha * phi;
        w += beta * phi;
    }
    return {v, w};
}

}  // namespace plate_nc::spectral
