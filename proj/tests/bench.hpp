#pragma once

// Small control problems shared by the adjoint and control tests.

#include "quench/control_opt.hpp"

#include <cmath>

namespace testutil {

// 2pi x 2pi box, one smooth bump as initial data, tracking targets for every
// cost term. The domain size keeps dt k^4 moderate at the test resolutions.
inline quench::ControlProblem bench_problem(int nx, int nt, double alpha, double t_final = 1.0) {
    using namespace quench;
    const double L = 2.0 * M_PI;
    ControlProblem p;
    p.grid = Grid(nx, nx, L, L);
    p.time = TimeGrid(t_final, nt);
    p.potential = Potential{potential::ConcavePart{0.0, 1.0}, potential::LogQuench{alpha}};
    p.data = {make_series(p.grid, p.time), Field(p.grid), Field(p.grid), Field(p.grid)};
    for (int j = 0; j < nx; ++j)
        for (int i = 0; i < nx; ++i)
            p.data.phi0(i, j) = 0.6 * std::cos(M_PI * p.grid.x(i) / L) * std::cos(M_PI * p.grid.y(j) / L);
    p.box = constant_box(p.grid, p.time, -2.0, 2.0);
    p.cost = CostSpec::zeros(p.grid, p.time);
    p.cost.beta = {1, 1, 1, 1, 1, 1};
    p.cost.nu = 0.1;
    for (auto& f : p.cost.phi_q)
        for (int j = 0; j < nx; ++j)
            for (int i = 0; i < nx; ++i) f(i, j) = 0.5 * std::cos(M_PI * p.grid.x(i) / L);
    p.cost.phi_omega = p.cost.phi_q.back();
    for (auto& f : p.cost.w_q) f += 0.2;
    p.cost.w_omega += 0.3;
    return p;
}

inline quench::TimeSeries bench_control(const quench::ControlProblem& p, double scale = 0.3) {
    quench::TimeSeries u = quench::smooth_direction(p.grid, p.time, 99);
    for (auto& f : u) f *= scale;
    return quench::project_box(u, p.box);
}

} // namespace testutil
