#include "quench/grid.hpp"
#include "quench/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace quench {

Grid::Grid(int nx_, int ny_, double lx_, double ly_) : nx(nx_), ny(ny_), lx(lx_), ly(ly_) {
    if (nx < 2 || ny < 2) throw Error("Grid: nx and ny must be at least 2");
    if (!(lx > 0.0) || !(ly > 0.0)) throw Error("Grid: edge lengths must be positive");
}

Field::Field(const Grid& g, std::vector<double> values) : grid_(g), values_(std::move(values)) {
    if (values_.size() != g.size())
        throw ShapeMismatch("Field: expected " + std::to_string(g.size()) + " values, got " +
                            std::to_string(values_.size()));
}

Field& Field::operator+=(const Field& o) {
    require_same_grid(*this, o, "Field::operator+=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    require_same_grid(*this, o, "Field::operator-=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
}

Field& Field::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

Field& Field::operator+=(double c) {
    for (double& v : values_) v += c;
    return *this;
}

Field& Field::axpy(double s, const Field& o) {
    require_same_grid(*this, o, "Field::axpy");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
    return *this;
}

double Field::norm_inf() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool Field::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }
Field operator*(Field a, double s) { return a *= s; }

Field hadamard(const Field& a, const Field& b) {
    require_same_grid(a, b, "hadamard");
    Field r(a.grid());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] * b[k];
    return r;
}

void require_same_grid(const Field& a, const Field& b, const char* what) {
    if (!(a.grid() == b.grid()) || a.size() != b.size())
        throw ShapeMismatch(std::string(what) + ": grid mismatch");
}

double inner(const Field& a, const Field& b) {
    require_same_grid(a, b, "inner");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s * a.grid().cell_area();
}

double norm_l2(const Field& a) { return std::sqrt(inner(a, a)); }

double mean_value(const Field& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s * f.grid().cell_area() / f.grid().area();
}

Field remove_mean(Field f) {
    f += -mean_value(f);
    return f;
}

Field laplacian_neumann(const Field& f) {
    const Grid& g = f.grid();
    const double ax = 1.0 / (g.hx() * g.hx());
    const double ay = 1.0 / (g.hy() * g.hy());
    Field out(g);
    for (int j = 0; j < g.ny; ++j) {
        const int jm = j > 0 ? j - 1 : j;
        const int jp = j < g.ny - 1 ? j + 1 : j;
        for (int i = 0; i < g.nx; ++i) {
            const int im = i > 0 ? i - 1 : i;
            const int ip = i < g.nx - 1 ? i + 1 : i;
            const double c = f(i, j);
            out(i, j) = ax * ((f(ip, j) - c) + (f(im, j) - c)) + ay * ((f(i, jp) - c) + (f(i, jm) - c));
        }
    }
    return out;
}

double grad_norm_sq(const Field& f) {
    const Grid& g = f.grid();
    double sx = 0.0, sy = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            const double d = f(i + 1, j) - f(i, j);
            sx += d * d;
        }
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double d = f(i, j + 1) - f(i, j);
            sy += d * d;
        }
    // (d/h)^2 * hx*hy per face
    return sx * g.hy() / g.hx() + sy * g.hx() / g.hy();
}

Field inv_neumann_laplacian(const Field& psi) {
    const double m = mean_value(psi);
    if (std::abs(m) > kZeroMeanRelTol * psi.norm_inf())
        throw NonZeroMean("inv_neumann_laplacian: right-hand side has mean " + std::to_string(m));
    auto sp = Spectral::for_grid(psi.grid());
    Field z = sp->solve_shifted(psi, 0.0, 1.0);
    return remove_mean(std::move(z));
}

Field inv_neumann_laplacian_projected(const Field& psi) {
    auto sp = Spectral::for_grid(psi.grid());
    return remove_mean(sp->solve_shifted(psi, 0.0, 1.0));
}

double dual_norm(const Field& psi) {
    const double m = mean_value(psi);
    Field z = inv_neumann_laplacian_projected(psi);
    return std::sqrt(grad_norm_sq(z) + m * m);
}

// ----------------------------------------------------------------------------

TimeGrid::TimeGrid(double t_final_, int nt_) : t_final(t_final_), nt(nt_) {
    if (nt < 1) throw Error("TimeGrid: nt must be at least 1");
    if (!(t_final > 0.0)) throw Error("TimeGrid: final time must be positive");
}

TimeSeries make_series(const Grid& g, const TimeGrid& tg, double value) {
    return TimeSeries(static_cast<std::size_t>(tg.nodes()), Field(g, value));
}

void require_series(const TimeSeries& s, const TimeGrid& tg, const char* what) {
    if (s.size() != static_cast<std::size_t>(tg.nodes()))
        throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(tg.nodes()) +
                            " time levels, got " + std::to_string(s.size()));
}

TimeSeries convolve_forward(const TimeSeries& series, const TimeGrid& tg) {
    require_series(series, tg, "convolve_forward");
    const double h = 0.5 * tg.dt();
    TimeSeries out(series.size(), Field(series.front().grid()));
    for (int n = 1; n <= tg.nt; ++n) {
        out[n] = out[n - 1];
        out[n].axpy(h, series[n - 1]).axpy(h, series[n]);
    }
    return out;
}

TimeSeries convolve_backward(const TimeSeries& series, const TimeGrid& tg) {
    require_series(series, tg, "convolve_backward");
    const double h = 0.5 * tg.dt();
    TimeSeries out(series.size(), Field(series.front().grid()));
    for (int n = tg.nt - 1; n >= 0; --n) {
        out[n] = out[n + 1];
        out[n].axpy(h, series[n + 1]).axpy(h, series[n]);
    }
    return out;
}

double inner_q(const TimeSeries& a, const TimeSeries& b, const TimeGrid& tg) {
    require_series(a, tg, "inner_q");
    require_series(b, tg, "inner_q");
    double s = 0.0;
    for (int n = 0; n <= tg.nt; ++n) s += tg.weight(n) * inner(a[n], b[n]);
    return s;
}

double norm_l2q(const TimeSeries& a, const TimeGrid& tg) { return std::sqrt(inner_q(a, a, tg)); }

} // namespace quench
