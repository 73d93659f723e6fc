#include "quench/pcg.hpp"

#include <algorithm>
#include <cmath>

namespace quench {

PcgResult pcg(const LinearOp& apply, const LinearOp& precond, const Field& b, Field x0,
              double rel_tol, double abs_tol, int max_iter) {
    PcgResult res{std::move(x0)};
    const double bnorm = norm_l2(b);
    if (bnorm == 0.0) {
        res.x = Field(b.grid());
        res.converged = true;
        return res;
    }
    const double target = std::max(rel_tol * bnorm, abs_tol);

    Field r = b - apply(res.x);
    double rnorm = norm_l2(r);
    if (rnorm <= target) {
        res.rel_residual = rnorm / bnorm;
        res.converged = true;
        return res;
    }
    Field z = precond(r);
    Field p = z;
    double rz = inner(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        const Field ap = apply(p);
        const double pap = inner(p, ap);
        if (!(pap > 0.0)) break; // lost positive definiteness
        const double step = rz / pap;
        res.x.axpy(step, p);
        r.axpy(-step, ap);
        rnorm = norm_l2(r);
        res.iterations = it;
        if (rnorm <= target) {
            res.rel_residual = rnorm / bnorm;
            res.converged = true;
            return res;
        }
        z = precond(r);
        const double rz_new = inner(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        p *= beta;
        p += z;
    }
    res.rel_residual = rnorm / bnorm;
    return res;
}

LinearOp split_preconditioner(std::shared_ptr<const Spectral> sp, double c, const Field& d) {
    const Grid& g = sp->grid();
    const double a0 = 2.0 / (g.hx() * g.hx()) + 2.0 / (g.hy() * g.hy());
    const double big = 10.0 * (a0 + c);
    std::vector<char> stiff(d.size(), 0);
    double dsum = 0.0;
    int nfree = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (d[k] > big) {
            stiff[k] = 1;
        } else {
            dsum += std::max(d[k], 0.0);
            ++nfree;
        }
    }
    const double dbar = nfree > 0 ? dsum / nfree : 0.0;
    return [sp, c, a0, dbar, d, stiff = std::move(stiff)](const Field& x) {
        Field xf = x;
        for (std::size_t k = 0; k < xf.size(); ++k)
            if (stiff[k]) xf[k] = 0.0;
        Field z = sp->apply_symbol(xf, [c, dbar](double lam) { return lam > 0.0 ? 1.0 / (c / lam + lam + dbar) : 0.0; });
        for (std::size_t k = 0; k < z.size(); ++k)
            if (stiff[k]) z[k] = x[k] / (d[k] + a0);
        return remove_mean(std::move(z));
    };
}

} // namespace quench
