#pragma once

#include "quench/grid.hpp"
#include "quench/spectral.hpp"

#include <functional>
#include <memory>

namespace quench {

struct PcgResult {
    Field x;
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

using LinearOp = std::function<Field(const Field&)>;

/// Preconditioned conjugate gradients for an SPD operator in the discrete
/// L2 inner product. Stops when ||r|| <= rel_tol * ||b|| or ||r|| <= abs_tol.
PcgResult pcg(const LinearOp& apply, const LinearOp& precond, const Field& b, Field x0,
              double rel_tol, double abs_tol = 0.0, int max_iter = 2000);

/// Preconditioner for P(c N - Lap + diag(d))P on mean-free fields, d >= 0.
/// Cells where d exceeds ten times the stencil scale (near-pure phases under
/// a log potential) get the diagonal inverse; the rest the spectral inverse
/// with the mean of d over those cells.
LinearOp split_preconditioner(std::shared_ptr<const Spectral> sp, double c, const Field& d);

} // namespace quench
