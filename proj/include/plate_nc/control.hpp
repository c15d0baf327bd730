/**
 * @file control.hpp
 * @brief Scheme-independent pieces of the steering control with Kalman
 *        index one: the bump weight f_T, mu_0 and the G vector whose
 *        inverse-Laplacian image gives mu_1'.
 */
#pragma once

#include <stdexcept>

#include "plate_nc/core.hpp"

namespace plate_nc::control {

namespace detail {
inline void check_time(double t, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("steering weight: T must be positive");
    // One ulp of slack so that t = m*dt lands inside [0, T].
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * T;
    if (t < -slack || t > T + slack)
        throw std::out_of_range("steering weight: t outside [0, T]");
}
}  // namespace detail

/// f_T(t) = 6 t (T - t) / T^3, the k = 1 bump normalized to unit integral.
inline double f_weight(double t, double T) {
    detail::check_time(t, T);
    return 6.0 * t * (T - t) / (T * T * T);
}

inline double f_weight_prime(double t, double T) {
    detail::check_time(t, T);
    return 6.0 * (T - 2.0 * t) / (T * T * T);
}

/// mu_0 = -(rho vh + wh) f_T(t)
inline Vector mu_zero(const Vector& vh, const Vector& wh, double rho, double t, double T) {
    if (vh.size() != wh.size()) throw std::invalid_argument("mu_zero: length mismatch");
    return -(rho * vh + wh) * f_weight(t, T);
}

/// G = (vh_next2 - vh_next)/dt * f_T(t_next) + vh_next * f_T'(t_next);
/// forward-difference approximation of d/dt (v_h f_T) at t_next.
inline Vector g_vector(const Vector& vh_next2, const Vector& vh_next, double dt, double t_next,
                       double T) {
    if (vh_next2.size() != vh_next.size()) throw std::invalid_argument("g_vector: length mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("g_vector: dt must be positive");
    return (vh_next2 - vh_next) / dt * f_weight(t_next, T) + vh_next * f_weight_prime(t_next, T);
}

}  // namespace plate_nc::control
