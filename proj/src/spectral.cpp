#include "quench/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace quench {

namespace {

// The FFTW planner is not reentrant; plan execution on fresh arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> axis_eigenvalues(int n, double h, double len) {
    std::vector<double> e(n);
    for (int k = 0; k < n; ++k)
        e[k] = 2.0 / (h * h) * (1.0 - std::cos(std::numbers::pi * k * h / len));
    e[0] = 0.0;
    return e;
}

} // namespace

Spectral::Spectral(const Grid& g) : grid_(g) {
    eig_x_ = axis_eigenvalues(g.nx, g.hx(), g.lx);
    eig_y_ = axis_eigenvalues(g.ny, g.hy(), g.ly);
    eig_.resize(g.size());
    for (int l = 0; l < g.ny; ++l)
        for (int k = 0; k < g.nx; ++k) eig_[g.index(k, l)] = eig_x_[k] + eig_y_[l];

    std::lock_guard lock(planner_mutex());
    std::vector<double> a(g.size()), b(g.size());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plan_fwd_ = fftw_plan_r2r_2d(g.ny, g.nx, a.data(), b.data(), FFTW_REDFT10, FFTW_REDFT10, flags);
    plan_bwd_ = fftw_plan_r2r_2d(g.ny, g.nx, a.data(), b.data(), FFTW_REDFT01, FFTW_REDFT01, flags);
    if (!plan_fwd_ || !plan_bwd_) throw Error("FFTW planning failed");
}

Spectral::~Spectral() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

std::vector<double> Spectral::forward(const Field& f) const {
    if (!(f.grid() == grid_)) throw ShapeMismatch("Spectral::forward: grid mismatch");
    std::vector<double> in(f.values().begin(), f.values().end());
    std::vector<double> out(in.size());
    fftw_execute_r2r(static_cast<fftw_plan>(plan_fwd_), in.data(), out.data());
    return out;
}

Field Spectral::backward(std::vector<double> coeffs) const {
    std::vector<double> out(coeffs.size());
    fftw_execute_r2r(static_cast<fftw_plan>(plan_bwd_), coeffs.data(), out.data());
    const double scale = 1.0 / (4.0 * grid_.nx * grid_.ny);
    for (double& v : out) v *= scale;
    return Field(grid_, std::move(out));
}

Field Spectral::apply_symbol(const Field& f, const std::function<double(double)>& symbol) const {
    auto c = forward(f);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= symbol(eig_[k]);
    return backward(std::move(c));
}

Field Spectral::solve_shifted(const Field& rhs, double c0, double c1) const {
    auto c = forward(rhs);
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double d = c0 + c1 * eig_[k];
        c[k] = (d == 0.0) ? 0.0 : c[k] / d;
    }
    return backward(std::move(c));
}

std::shared_ptr<const Spectral> Spectral::for_grid(const Grid& g) {
    static std::mutex m;
    static std::map<std::tuple<int, int, double, double>, std::shared_ptr<const Spectral>> cache;
    std::lock_guard lock(m);
    auto key = std::make_tuple(g.nx, g.ny, g.lx, g.ly);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto s = std::make_shared<const Spectral>(g);
    cache.emplace(key, s);
    return s;
}

} // namespace quench
