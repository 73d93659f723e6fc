// ============================================================================
// quench/potentials.hpp - double-well machinery
//
//   h(r)      = (1+r)ln(1+r) + (1-r)ln(1-r),  h(+-1) = 2 ln 2
//   h_alpha   = alpha * h                     (deep-quench family)
//   F(r)      = c1 - c2 r^2                   (concave part)
//   h_{a,eps} = Moreau-Yosida envelope of h_alpha; for alpha = 0 the envelope
//               of the indicator of [-1,1], i.e. the exterior penalty
//               (1/2eps) dist(r,[-1,1])^2.
// ============================================================================
#pragma once

#include "quench/grid.hpp"

#include <variant>

namespace quench {

class DomainError : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

namespace potential {

double h_value(double r);
double h_prime(double r);
double h_second(double r);

struct ConcavePart {
    double c1 = 0.0;
    double c2 = 1.0;

    double value(double r) const { return c1 - c2 * r * r; }
    double prime(double r) const { return -2.0 * c2 * r; }
    double second(double /*r*/) const { return -2.0 * c2; }
};

struct LogQuench {
    double alpha = 1.0;
};

struct ObstaclePenalty {
    double alpha = 0.0;
    double eps = 1e-4;
};

using ConvexMode = std::variant<LogQuench, ObstaclePenalty>;

/// Throws DomainError if the mode parameters are out of range.
void validate(const ConvexMode& mode);
bool is_log(const ConvexMode& mode);
double alpha_of(const ConvexMode& mode);

/// Result of the scalar proximal problem  min_s h_alpha(s) + (r-s)^2/(2 eps).
struct Prox {
    double s;       // proximal point, in [-1, 1]
    double slope;   // envelope derivative (r - s)/eps
    int iterations;
};

/// Safeguarded Newton in y = h'(s), where the proximal equation reads
/// tanh(y/2) + eps*alpha*y = r. The bracket eps*alpha*y in (r-1, r+1) always
/// contains the root. Throws NonConvergence after 100 iterations.
Prox moreau_yosida_prox(double r, double alpha, double eps);

double moreau_yosida_value(double r, double alpha, double eps);
double moreau_yosida_prime(double r, double alpha, double eps);
/// Derivative of moreau_yosida_prime (a.e. for alpha = 0).
double moreau_yosida_second(double r, double alpha, double eps);

/// Convex part dispatch: h_alpha', h_alpha'' (log) or the envelope (penalty).
double convex_value(const ConvexMode& mode, double r);
double convex_prime(const ConvexMode& mode, double r);
double convex_second(const ConvexMode& mode, double r);

Field convex_prime(const ConvexMode& mode, const Field& f);
Field convex_second(const ConvexMode& mode, const Field& f);

} // namespace potential
} // namespace quench
