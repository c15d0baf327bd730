/**
 * @file null_control.hpp
 * @brief The time loop shared by both schemes: advance a homogeneous twin
 *        two levels ahead, build u^{j+1} from it, then advance the
 *        controlled state with that forcing.
 */
#pragma once

#include <concepts>
#include <string>
#include <vector>

#include "plate_nc/core.hpp"

namespace plate_nc {

/// What a spatial scheme must provide to run the steering loop.
template <class S>
concept SteeringScheme = requires(const S& s, const StatePair& x, const Vector& u, double t) {
    { s.dim() } -> std::convertible_to<Eigen::Index>;
    { s.homogeneous_step(x) } -> std::same_as<StatePair>;
    { s.controlled_step(x, u) } -> std::same_as<StatePair>;
    { s.control_at_step(u, u, u, t, t) } -> std::same_as<Vector>;
    { s.norm() } -> std::convertible_to<NormWeight>;
    { s.dt() } -> std::convertible_to<double>;
};

struct NullControlRun {
    RunReport report;
    ControlTrajectory controls;
    StatePair terminal;
    std::vector<std::string> warnings;
};

/// Executes the steering loop for m = T/dt steps. The scheme's dt must
/// divide T into an integer number of steps (to within roundoff).
template <SteeringScheme Scheme>
NullControlRun run_null_control(const Scheme& scheme, const StatePair& initial, double T) {
    if (initial.size() != scheme.dim())
        throw std::invalid_argument("run_null_control: initial data has the wrong dimension");
    const double dt = scheme.dt();
    const double ratio = T / dt;
    const int m = static_cast<int>(std::llround(ratio));
    if (std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("terminal time is not an integer multiple of dt");
    TimeGrid grid(T, m);

    NullControlRun run{RunReport{}, ControlTrajectory(grid), initial, {}};

    StatePair twin_next = scheme.homogeneous_step(initial);      // level j+1
    StatePair twin_next2 = scheme.homogeneous_step(twin_next);   // level j+2
    for (int j = 0; j < m; ++j) {
        const double t_next = grid[static_cast<std::size_t>(j) + 1];
        Vector u = scheme.control_at_step(twin_next2.v, twin_next.v, twin_next.w, t_next, T);
        run.terminal = scheme.controlled_step(run.terminal, u);
        run.controls.controls.push_back(std::move(u));
        if (j + 1 < m) {
            twin_next = std::move(twin_next2);
            twin_next2 = scheme.homogeneous_step(twin_next);
        }
    }

    const NormWeight norm = scheme.norm();
    run.report.terminal_energy = energy(run.terminal, norm);
    run.report.control_norm = run.controls.l2_norm(norm);
    run.report.T = T;
    run.report.dt = dt;
    run.report.N = scheme.dim();
    return run;
}

}  // namespace plate_nc
