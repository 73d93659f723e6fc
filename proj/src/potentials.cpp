#include "quench/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace quench::potential {

double h_value(double r) {
    const double a = std::abs(r);
    if (a > 1.0) throw DomainError("h: argument " + std::to_string(r) + " outside [-1,1]");
    if (a == 1.0) return 2.0 * std::numbers::ln2;
    return (1.0 + r) * std::log1p(r) + (1.0 - r) * std::log1p(-r);
}

double h_prime(double r) {
    if (!(std::abs(r) < 1.0)) throw DomainError("h': argument " + std::to_string(r) + " outside (-1,1)");
    return std::log1p(r) - std::log1p(-r);
}

double h_second(double r) {
    if (!(std::abs(r) < 1.0)) throw DomainError("h'': argument " + std::to_string(r) + " outside (-1,1)");
    return 2.0 / ((1.0 - r) * (1.0 + r));
}

void validate(const ConvexMode& mode) {
    if (const auto* lq = std::get_if<LogQuench>(&mode)) {
        if (!(lq->alpha > 0.0)) throw DomainError("LogQuench requires alpha > 0");
    } else {
        const auto& op = std::get<ObstaclePenalty>(mode);
        if (!(op.eps > 0.0)) throw DomainError("ObstaclePenalty requires eps > 0");
        if (!(op.alpha >= 0.0)) throw DomainError("ObstaclePenalty requires alpha >= 0");
    }
}

bool is_log(const ConvexMode& mode) { return std::holds_alternative<LogQuench>(mode); }

double alpha_of(const ConvexMode& mode) {
    return std::visit([](const auto& m) { return m.alpha; }, mode);
}

Prox moreau_yosida_prox(double r, double alpha, double eps) {
    if (!(eps > 0.0) || !(alpha >= 0.0)) throw DomainError("moreau_yosida: need eps > 0, alpha >= 0");
    if (alpha == 0.0) {
        const double s = std::clamp(r, -1.0, 1.0);
        return {s, (r - s) / eps, 0};
    }
    const double c = eps * alpha;
    auto g = [&](double y) { return std::tanh(0.5 * y) + c * y - r; };
    double lo = (r - 1.0) / c;
    double hi = (r + 1.0) / c;
    double y = 2.0 * std::atanh(std::clamp(r, -1.0 + 1e-12, 1.0 - 1e-12));
    if (!(y > lo && y < hi)) y = 0.5 * (lo + hi);

    for (int it = 1; it <= 100; ++it) {
        const double gy = g(y);
        if (gy == 0.0 || std::abs(gy) <= 4e-16 * (1.0 + std::abs(r))) {
            return {std::tanh(0.5 * y), alpha * y, it};
        }
        if (gy > 0.0) hi = y; else lo = y;
        if (hi - lo <= 4e-16 * std::max(1.0, std::abs(y))) return {std::tanh(0.5 * y), alpha * y, it};
        const double ch = std::cosh(0.5 * y);
        const double dg = (std::isfinite(ch) ? 0.5 / (ch * ch) : 0.0) + c;
        double next = y - gy / dg;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        y = next;
    }
    throw NonConvergence("moreau_yosida_prox: no convergence for r=" + std::to_string(r) +
                         ", alpha=" + std::to_string(alpha) + ", eps=" + std::to_string(eps));
}

double moreau_yosida_prime(double r, double alpha, double eps) {
    return moreau_yosida_prox(r, alpha, eps).slope;
}

double moreau_yosida_value(double r, double alpha, double eps) {
    const Prox p = moreau_yosida_prox(r, alpha, eps);
    const double d = r - p.s;
    return (alpha > 0.0 ? alpha * h_value(p.s) : 0.0) + d * d / (2.0 * eps);
}

double moreau_yosida_second(double r, double alpha, double eps) {
    if (alpha == 0.0) return std::abs(r) > 1.0 ? 1.0 / eps : 0.0;
    const Prox p = moreau_yosida_prox(r, alpha, eps);
    // alpha h''(s) / (1 + eps alpha h''(s)) with h''(s) = 2 cosh^2(y/2), y = slope/alpha
    const double ch = std::cosh(0.5 * p.slope / alpha);
    const double sech2 = std::isfinite(ch) ? 1.0 / (ch * ch) : 0.0;
    return 1.0 / (sech2 / (2.0 * alpha) + eps);
}

double convex_value(const ConvexMode& mode, double r) {
    if (const auto* lq = std::get_if<LogQuench>(&mode)) return lq->alpha * h_value(r);
    const auto& op = std::get<ObstaclePenalty>(mode);
    return moreau_yosida_value(r, op.alpha, op.eps);
}

double convex_prime(const ConvexMode& mode, double r) {
    if (const auto* lq = std::get_if<LogQuench>(&mode)) return lq->alpha * h_prime(r);
    const auto& op = std::get<ObstaclePenalty>(mode);
    return moreau_yosida_prime(r, op.alpha, op.eps);
}

double convex_second(const ConvexMode& mode, double r) {
    if (const auto* lq = std::get_if<LogQuench>(&mode)) return lq->alpha * h_second(r);
    const auto& op = std::get<ObstaclePenalty>(mode);
    return moreau_yosida_second(r, op.alpha, op.eps);
}

Field convex_prime(const ConvexMode& mode, const Field& f) {
    Field out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = convex_prime(mode, f[k]);
    return out;
}

Field convex_second(const ConvexMode& mode, const Field& f) {
    Field out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = convex_second(mode, f[k]);
    return out;
}

} // namespace quench::potential
