// ============================================================================
// quench/spectral.hpp - DCT-II diagonalization of the Neumann Laplacian
//
// On the cell-centered mirror grid the discrete Laplacian has eigenvectors
// cos(pi k (i+1/2)/nx) cos(pi l (j+1/2)/ny) with eigenvalues -(lam_k + lam_l),
// lam_k = (2/hx^2)(1 - cos(pi k hx/lx)). Any operator that is a function of
// -Lap_h is therefore applied or inverted by one forward/backward transform.
// ============================================================================
#pragma once

#include "quench/grid.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace quench {

class Spectral {
public:
    explicit Spectral(const Grid& g);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    const Grid& grid() const { return grid_; }

    /// Eigenvalue of -Lap_h for mode (k, l); zero only at (0, 0).
    double eigenvalue(int k, int l) const { return eig_x_[k] + eig_y_[l]; }
    /// Flattened eigenvalues of -Lap_h, same layout as a Field.
    const std::vector<double>& eigenvalues() const { return eig_; }

    /// Unnormalized forward DCT-II in both directions.
    std::vector<double> forward(const Field& f) const;
    /// Inverse of forward(), including the 1/(4 nx ny) normalization.
    Field backward(std::vector<double> coeffs) const;

    /// Applies the operator m(-Lap_h): each mode is multiplied by
    /// symbol(lambda), lambda = eigenvalue of -Lap_h (0 for the constant mode).
    Field apply_symbol(const Field& f, const std::function<double(double)>& symbol) const;

    /// Solves (c0 I - c1 Lap_h) z = rhs. With c0 == 0 the constant mode of the
    /// result is set to zero (the caller guarantees a mean-free rhs).
    Field solve_shifted(const Field& rhs, double c0, double c1) const;

    /// Shared, thread-safe instance per grid.
    static std::shared_ptr<const Spectral> for_grid(const Grid& g);

private:
    Grid grid_;
    std::vector<double> eig_x_, eig_y_, eig_;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
};

} // namespace quench
