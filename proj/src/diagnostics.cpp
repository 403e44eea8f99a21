#include "wigner2e/diagnostics.hpp"

#include <cmath>
#include <complex>
#include <fmt/format.h>

#include "wigner2e/advection.hpp"
#include "wigner2e/parallel.hpp"

namespace wigner2e {

PurityReport purity_report(const WignerState& f) {
    if (f.arity() != Arity::one) throw ValidationError("purity: input must be a one-electron state");
    const double norm = f.integral();
    if (std::abs(norm - 1.0) > 1e-4)
        throw ValidationError(fmt::format("purity: state is not normalized (integral {:.6g})", norm));
    const double* v = f.data();
    const double s = ordered_sum(f.size(), [&](std::size_t i) { return v[i] * v[i]; });
    const int d = f.grid().d;
    PurityReport r;
    r.raw = std::pow(2.0 * kPi * kHbar, d) * s * f.cell_volume();
    r.clipped = r.raw > 1.0 + 1e-3;
    r.value = r.clipped ? 1.0 : r.raw;
    return r;
}

double purity(const WignerState& f) { return purity_report(f).value; }

double reduced_purity(const WignerState& f, int electron) { return purity(marginal(f, electron)); }

double separability_metric(const WignerState& f) {
    if (f.arity() != Arity::two) throw ValidationError("separability_metric: input must be a two-electron state");
    const WignerState prod = tensor_product(marginal(f, 1), marginal(f, 2));
    const double* a = f.data();
    const double* b = prod.data();
    const double num = ordered_sum(f.size(), [&](std::size_t i) { return (a[i] - b[i]) * (a[i] - b[i]); });
    const double den = ordered_sum(f.size(), [&](std::size_t i) { return a[i] * a[i]; });
    if (den == 0.0) throw ValidationError("separability_metric: state is identically zero");
    return std::sqrt(num / den);
}

namespace {

// W(x, p) along one axis by the trapezoid rule over s.
std::vector<double> weyl_axis(double x0, double p0, double sigma, const WignerGrid& g, int nodes) {
    const double ds = sigma / nodes;
    const int K = 24 * nodes;
    const double norm = std::pow(2.0 * kPi * sigma * sigma, -0.25);
    auto psi = [&](double x) {
        const double u = x - x0;
        return norm * std::exp(std::complex<double>(-u * u / (4.0 * sigma * sigma), p0 * x / kHbar));
    };
    std::vector<double> w(std::size_t(g.n_x) * g.n_p);
    for (int i = 0; i < g.n_x; ++i) {
        const double r = g.x(i);
        std::vector<std::complex<double>> rho(2 * K + 1);
        for (int k = -K; k <= K; ++k) rho[k + K] = psi(r + 0.5 * k * ds) * std::conj(psi(r - 0.5 * k * ds));
        for (int n = 0; n < g.n_p; ++n) {
            const double p = g.p(n);
            std::complex<double> s = 0.0;
            for (int k = -K; k <= K; ++k) s += std::exp(std::complex<double>(0.0, -p * k * ds / kHbar)) * rho[k + K];
            w[std::size_t(i) * g.n_p + n] = s.real() * ds / (2.0 * kPi * kHbar);
        }
    }
    return w;
}

}  // namespace

WignerState weyl_oracle_gaussian(const GaussianPacket& packet, const WignerGrid& grid, int nodes_per_sigma) {
    grid.validate();
    packet.validate(grid.d);
    if (nodes_per_sigma < 2) throw ValidationError("weyl_oracle_gaussian: nodes_per_sigma must be >= 2");
    const int n = grid.n_x, q = grid.n_p;
    WignerState out = WignerState::zeros(grid, Arity::one);
    if (grid.d == 1) {
        const auto w = weyl_axis(packet.center_r[0], packet.center_p[0], packet.sigma[0], grid, nodes_per_sigma);
        std::copy(w.begin(), w.end(), out.data());
    } else {
        // the density matrix of the packet factorizes over axes
        const auto wx = weyl_axis(packet.center_r[0], packet.center_p[0], packet.sigma[0], grid, nodes_per_sigma);
        const auto wy = weyl_axis(packet.center_r[1], packet.center_p[1], packet.sigma[1], grid, nodes_per_sigma);
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy)
                for (int px = 0; px < q; ++px)
                    for (int py = 0; py < q; ++py)
                        out[((std::size_t(ix) * n + iy) * q + px) * q + py] =
                            wx[std::size_t(ix) * q + px] * wy[std::size_t(iy) * q + py];
    }
    out *= 1.0 / out.integral();
    return out;
}

const char* to_string(Norm n) { return n == Norm::L1 ? "L1" : "L2"; }

namespace {

// Trigonometric interpolation weights of the samples 0..n-1 at fractional index u.
std::vector<double> interpolation_weights(int n, double u) {
    std::vector<double> w(n, 0.0);
    const double r = std::round(u);
    if (std::abs(u - r) < 1e-9) {
        w[((int(r) % n) + n) % n] = 1.0;
        return w;
    }
    // row 0 of the shift by -u: (S f)_0 = f(u)
    const auto S = shift_matrix(n, -u, Interpolation::spectral);
    for (int j = 0; j < n; ++j) w[j] = S[std::size_t(j) * n];
    return w;
}

}  // namespace

WignerState restrict_to_grid(const WignerState& f, const WignerGrid& target) {
    const WignerGrid& g = f.grid();
    if (f.arity() != Arity::one || g.d != 1 || target.d != 1)
        throw ValidationError("restrict_to_grid: d = 1 one-electron states only");
    target.validate();
    if (g == target) return f;
    const double eps = 1e-9;
    if (target.x(0) < g.x(0) - eps * g.dx() || target.x(target.n_x - 1) > g.x(g.n_x - 1) + eps * g.dx() ||
        target.p(0) < g.p(0) - eps * g.dp() || target.p(target.n_p - 1) > g.p(g.n_p - 1) + eps * g.dp())
        throw ValidationError("restrict_to_grid: target cells lie outside the source grid");
    std::vector<std::vector<double>> wx(target.n_x), wp(target.n_p);
    for (int i = 0; i < target.n_x; ++i) wx[i] = interpolation_weights(g.n_x, (target.x(i) - g.x_min) / g.dx() - 0.5);
    for (int m = 0; m < target.n_p; ++m) wp[m] = interpolation_weights(g.n_p, target.p(m) / g.dp() + 0.5 * (g.n_p - 1));
    WignerState out = WignerState::zeros(target, Arity::one, f.time());
    const int n = g.n_x, np = g.n_p;
    std::vector<double> col(n);
    for (int m = 0; m < target.n_p; ++m) {
        for (int j = 0; j < n; ++j) {
            double v = 0.0;
            for (int q = 0; q < np; ++q) v += wp[m][q] * f[std::size_t(j) * np + q];
            col[j] = v;
        }
        for (int i = 0; i < target.n_x; ++i) {
            double v = 0.0;
            for (int j = 0; j < n; ++j) v += wx[i][j] * col[j];
            out[std::size_t(i) * target.n_p + m] = v;
        }
    }
    return out;
}

double model_distance(const WignerState& a, const WignerState& b, Norm norm) {
    require_same_grid(a, b, "model_distance");
    if (a.arity() != b.arity()) throw ValidationError("model_distance: states have different arity");
    const double* x = a.data();
    const double* y = b.data();
    if (norm == Norm::L1)
        return ordered_sum(a.size(), [&](std::size_t i) { return std::abs(x[i] - y[i]); }) * a.cell_volume();
    return std::sqrt(ordered_sum(a.size(), [&](std::size_t i) { return (x[i] - y[i]) * (x[i] - y[i]); }) *
                     a.cell_volume());
}

ObservableSeries::ObservableSeries(std::vector<std::string> extra_columns) : extra_(std::move(extra_columns)) {}

const std::vector<std::string>& ObservableSeries::base_columns() {
    static const std::vector<std::string> c{"t", "norm", "purity1", "purity2", "separability"};
    return c;
}

std::vector<std::string> ObservableSeries::columns() const {
    auto c = base_columns();
    c.insert(c.end(), extra_.begin(), extra_.end());
    return c;
}

void ObservableSeries::add(Row row) {
    if (row.extra.size() != extra_.size())
        throw ValidationError(fmt::format("ObservableSeries: row has {} extra values, expected {}", row.extra.size(),
                                          extra_.size()));
    rows_.push_back(std::move(row));
}

std::vector<double> ObservableSeries::column(const std::string& name) const {
    std::vector<double> out;
    out.reserve(rows_.size());
    const auto& base = base_columns();
    for (std::size_t k = 0; k < base.size(); ++k) {
        if (base[k] != name) continue;
        for (const auto& r : rows_) {
            const double v[5] = {r.t, r.norm, r.purity1, r.purity2, r.separability};
            out.push_back(v[k]);
        }
        return out;
    }
    for (std::size_t k = 0; k < extra_.size(); ++k) {
        if (extra_[k] != name) continue;
        for (const auto& r : rows_) out.push_back(r.extra[k]);
        return out;
    }
    throw ValidationError("ObservableSeries: unknown column '" + name + "'");
}

void ObservableSeries::write_csv(std::ostream& os) const {
    const auto cols = columns();
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << '\n';
    for (const auto& r : rows_) {
        os << fmt::format("{:.10g},{:.15e},{:.15e},{:.15e},{:.15e}", r.t, r.norm, r.purity1, r.purity2,
                          r.separability);
        for (double v : r.extra) os << fmt::format(",{:.15e}", v);
        os << '\n';
    }
}

void write_pair_density_csv(const WignerState& f, bool momentum, std::ostream& os) {
    const auto& g = f.grid();
    if (f.arity() != Arity::two || g.d != 1) throw ValidationError("write_pair_density_csv: needs a d = 1 pair state");
    const int R = g.n_x, Q = g.n_p;
    const int n = momentum ? Q : R;
    std::vector<double> dens(std::size_t(n) * n, 0.0);
    for (int r1 = 0; r1 < R; ++r1)
        for (int r2 = 0; r2 < R; ++r2)
            for (int p1 = 0; p1 < Q; ++p1)
                for (int p2 = 0; p2 < Q; ++p2) {
                    const double v = f[((std::size_t(r1) * R + r2) * Q + p1) * Q + p2];
                    dens[momentum ? std::size_t(p1) * Q + p2 : std::size_t(r1) * R + r2] += v;
                }
    const double w = momentum ? g.dx() * g.dx() : g.dp() * g.dp();
    os << (momentum ? "P1,P2,density\n" : "r1,r2,density\n");
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double ca = momentum ? g.p(a) : g.x(a), cb = momentum ? g.p(b) : g.x(b);
            os << fmt::format("{:.10g},{:.10g},{:.15e}\n", ca, cb, dens[std::size_t(a) * n + b] * w);
        }
}

void write_state_csv(const WignerState& f, std::ostream& os) {
    if (f.arity() != Arity::one) throw ValidationError("write_state_csv: needs a one-electron state");
    const int d = f.grid().d;
    os << (d == 1 ? "x,Px,f\n" : "x,y,Px,Py,f\n");
    std::vector<double> z(2 * d);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.coordinates(i, z);
        for (double c : z) os << fmt::format("{:.10g},", c);
        os << fmt::format("{:.15e}\n", f[i]);
    }
}

}  // namespace wigner2e
