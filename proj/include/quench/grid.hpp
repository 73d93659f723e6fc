// ============================================================================
// quench/grid.hpp - uniform cell-centered 2-D grid with Neumann closure
//
// Cells are indexed row-major, x fastest: idx = j*nx + i, with cell centers
// at ((i+1/2)hx, (j+1/2)hy). Ghost cells mirror their interior neighbour, so
// every stencil operator here carries a homogeneous Neumann condition.
// ============================================================================
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quench {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by inv_neumann_laplacian when the right-hand side is not mean-free.
class NonZeroMean : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

struct Grid {
    int nx = 2;
    int ny = 2;
    double lx = 1.0;
    double ly = 1.0;

    Grid() = default;
    Grid(int nx_, int ny_, double lx_ = 1.0, double ly_ = 1.0);

    double hx() const { return lx / nx; }
    double hy() const { return ly / ny; }
    double cell_area() const { return hx() * hy(); }
    double area() const { return lx * ly; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    double x(int i) const { return (i + 0.5) * hx(); }
    double y(int j) const { return (j + 0.5) * hy(); }

    bool operator==(const Grid&) const = default;
};

/// Scalar grid function at one time level.
class Field {
public:
    Field() = default;
    explicit Field(const Grid& g, double value = 0.0) : grid_(g), values_(g.size(), value) {}
    Field(const Grid& g, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
    double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double s);
    Field& operator+=(double c);
    /// this += s * o
    Field& axpy(double s, const Field& o);

    double norm_inf() const;
    bool all_finite() const;

private:
    Grid grid_;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field operator*(Field a, double s);
/// Pointwise product.
Field hadamard(const Field& a, const Field& b);

void require_same_grid(const Field& a, const Field& b, const char* what);

/// Discrete L2(Omega) inner product (cell quadrature).
double inner(const Field& a, const Field& b);
double norm_l2(const Field& a);

/// Mean value (1/|Omega|) * sum(values) * hx * hy.
double mean_value(const Field& f);
/// Returns f - mean_value(f).
Field remove_mean(Field f);

/// Five-point Neumann Laplacian with mirrored ghost cells.
Field laplacian_neumann(const Field& f);

/// Squared discrete H1 seminorm, summed over interior faces with face measures.
/// Boundary faces carry zero flux under the mirror closure.
double grad_norm_sq(const Field& f);

/// Zero-mean tolerance used by inv_neumann_laplacian: 1e-10 * ||psi||_inf.
inline constexpr double kZeroMeanRelTol = 1e-10;

/// Zero-mean solution z of -Lap_h z = psi. Throws NonZeroMean when
/// |mean(psi)| exceeds kZeroMeanRelTol * ||psi||_inf.
Field inv_neumann_laplacian(const Field& psi);

/// N applied to psi - mean(psi); the constant mode is dropped without a check.
Field inv_neumann_laplacian_projected(const Field& psi);

/// sqrt(||grad N(psi - mean psi)||^2 + |mean psi|^2)
double dual_norm(const Field& psi);

// ----------------------------------------------------------------------------
// time

struct TimeGrid {
    double t_final = 1.0;
    int nt = 1;

    TimeGrid() = default;
    TimeGrid(double t_final_, int nt_);

    double dt() const { return t_final / nt; }
    double t(int n) const { return n == nt ? t_final : n * dt(); }
    int nodes() const { return nt + 1; }
    /// Composite trapezoid weight of node n (dt/2 at the ends, dt inside).
    double weight(int n) const { return (n == 0 || n == nt) ? 0.5 * dt() : dt(); }

    bool operator==(const TimeGrid&) const = default;
};

/// Field per time node t_0 ... t_nt.
using TimeSeries = std::vector<Field>;

TimeSeries make_series(const Grid& g, const TimeGrid& tg, double value = 0.0);
void require_series(const TimeSeries& s, const TimeGrid& tg, const char* what);

/// (1 * v)(t_n) = int_0^{t_n} v, composite trapezoid.
TimeSeries convolve_forward(const TimeSeries& series, const TimeGrid& tg);
/// (1 (*) v)(t_n) = int_{t_n}^T v, composite trapezoid.
TimeSeries convolve_backward(const TimeSeries& series, const TimeGrid& tg);

/// int_Q a*b with trapezoid in time and cell quadrature in space.
double inner_q(const TimeSeries& a, const TimeSeries& b, const TimeGrid& tg);
double norm_l2q(const TimeSeries& a, const TimeGrid& tg);

} // namespace quench
