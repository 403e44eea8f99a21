#include "wigner2e/potentials.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <complex>
#include <fmt/format.h>
#include <functional>
#include <map>
#include <mutex>

#include "wigner2e/parallel.hpp"

namespace wigner2e {

const char* to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::none: return "none";
        case PotentialKind::linear: return "linear";
        case PotentialKind::quadratic: return "quadratic";
        case PotentialKind::tabulated: return "tabulated";
        case PotentialKind::coulomb2d: return "coulomb2d";
        case PotentialKind::coulomb3d: return "coulomb3d";
    }
    return "?";
}

PotentialKind potential_kind_from_string(const std::string& s) {
    for (auto k : {PotentialKind::none, PotentialKind::linear, PotentialKind::quadratic, PotentialKind::tabulated,
                   PotentialKind::coulomb2d, PotentialKind::coulomb3d})
        if (s == to_string(k)) return k;
    throw ValidationError(fmt::format("unknown potential kind '{}'", s));
}

PotentialSpec PotentialSpec::none() { return {}; }

PotentialSpec PotentialSpec::linear(double alpha) {
    PotentialSpec s;
    s.kind = PotentialKind::linear;
    s.strength = alpha;
    return s;
}

PotentialSpec PotentialSpec::quadratic(double k) {
    PotentialSpec s;
    s.kind = PotentialKind::quadratic;
    s.strength = k;
    return s;
}

PotentialSpec PotentialSpec::coulomb(PotentialKind kind, double strength, double softening, std::vector<double> center) {
    PotentialSpec s;
    s.kind = kind;
    s.strength = strength;
    s.softening = softening;
    s.center = std::move(center);
    return s;
}

PotentialSpec PotentialSpec::tabulated(double x0, double dx, std::vector<double> samples) {
    PotentialSpec s;
    s.kind = PotentialKind::tabulated;
    s.table_x0 = x0;
    s.table_dx = dx;
    s.samples = std::move(samples);
    return s;
}

void PotentialSpec::validate(int d) const {
    if (!std::isfinite(strength)) throw ValidationError("potential: strength must be finite");
    if (!center.empty() && center.size() != std::size_t(d))
        throw ValidationError("potential: center must have d components");
    if (is_coulomb() && !(softening > 0.0))
        throw ValidationError("potential: Coulomb kinds need softening > 0");
    if (kind == PotentialKind::tabulated) {
        if (d != 1) throw ValidationError("potential: tabulated potentials are one-dimensional");
        if (!(table_dx > 0.0) || samples.size() < 2)
            throw ValidationError("potential: tabulated potential needs dx > 0 and at least two samples");
    }
}

namespace {

double squared_offset(const PotentialSpec& s, std::span<const double> r) {
    double rho2 = 0.0;
    for (std::size_t a = 0; a < r.size(); ++a) {
        const double c = s.center.empty() ? 0.0 : s.center[a];
        rho2 += (r[a] - c) * (r[a] - c);
    }
    return rho2;
}

double table_value(const PotentialSpec& s, double x, double* slope) {
    const double u = (x - s.table_x0) / s.table_dx;
    const double last = double(s.samples.size() - 1);
    if (u < -1e-9 || u > last + 1e-9)
        throw ValidationError(fmt::format("tabulated potential evaluated outside its support at x={:.6g}", x));
    std::size_t k = std::size_t(std::clamp(std::floor(u), 0.0, last - 1.0));
    const double t = u - double(k);
    if (slope) *slope = (s.samples[k + 1] - s.samples[k]) / s.table_dx;
    return (1.0 - t) * s.samples[k] + t * s.samples[k + 1];
}

}  // namespace

double pair_potential(PotentialKind kind, double lambda, double eps, double rho) {
    switch (kind) {
        case PotentialKind::coulomb3d: return lambda / std::sqrt(rho * rho + eps * eps);
        case PotentialKind::coulomb2d: return -0.5 * lambda * std::log(rho * rho + eps * eps);
        default: throw ValidationError("pair potential must be a Coulomb kind");
    }
}

double pair_force_magnitude(PotentialKind kind, double lambda, double eps, double rho) {
    const double q = rho * rho + eps * eps;
    switch (kind) {
        case PotentialKind::coulomb3d: return lambda * rho / (q * std::sqrt(q));
        case PotentialKind::coulomb2d: return lambda * rho / q;
        default: throw ValidationError("pair potential must be a Coulomb kind");
    }
}

double PotentialSpec::value(std::span<const double> r) const {
    switch (kind) {
        case PotentialKind::none: return 0.0;
        case PotentialKind::linear: return strength * r[0];
        case PotentialKind::quadratic: return 0.5 * strength * squared_offset(*this, r);
        case PotentialKind::coulomb2d:
        case PotentialKind::coulomb3d: return pair_potential(kind, strength, softening, std::sqrt(squared_offset(*this, r)));
        case PotentialKind::tabulated: return table_value(*this, r[0], nullptr);
    }
    return 0.0;
}

void PotentialSpec::force(std::span<const double> r, std::span<double> out) const {
    for (auto& v : out) v = 0.0;
    switch (kind) {
        case PotentialKind::none: return;
        case PotentialKind::linear: out[0] = -strength; return;
        case PotentialKind::tabulated: {
            double slope = 0.0;
            table_value(*this, r[0], &slope);
            out[0] = -slope;
            return;
        }
        default: break;
    }
    const double rho2 = squared_offset(*this, r);
    double g = 0.0;
    if (kind == PotentialKind::quadratic) {
        g = -strength;
    } else {
        const double q = rho2 + softening * softening;
        g = kind == PotentialKind::coulomb3d ? strength / (q * std::sqrt(q)) : strength / q;
    }
    for (std::size_t a = 0; a < r.size(); ++a) out[a] = g * (r[a] - (center.empty() ? 0.0 : center[a]));
}

double s_window(double s, double coherence_length, double taper_fraction) {
    const double a = std::abs(s);
    if (taper_fraction <= 0.0) return a <= coherence_length ? 1.0 : 0.0;
    const double start = (1.0 - taper_fraction) * coherence_length;
    if (a <= start) return 1.0;
    if (a >= coherence_length) return 0.0;
    const double t = (a - start) / (coherence_length - start);
    const double e0 = std::exp(-1.0 / t), e1 = std::exp(-1.0 / (1.0 - t));
    return e1 / (e0 + e1);
}

namespace {

struct Node {
    double s;
    double w;
};

// Composite 4-point Gauss-Legendre rule on [a, b].
std::vector<Node> composite_gauss(double a, double b, int panels) {
    using rule = boost::math::quadrature::gauss<double, 4>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    std::vector<Node> nodes;
    nodes.reserve(4 * panels);
    const double h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        const double mid = a + (k + 0.5) * h;
        for (std::size_t j = 0; j < x.size(); ++j) {
            nodes.push_back({mid - 0.5 * h * x[j], 0.5 * h * w[j]});
            nodes.push_back({mid + 0.5 * h * x[j], 0.5 * h * w[j]});
        }
    }
    return nodes;
}

int panel_count(const WignerGrid& g, const KernelQuadrature& q, bool half) {
    if (q.nodes_per_momentum < 8) throw ValidationError("kernel quadrature needs >= 8 nodes per momentum point");
    if (!(q.taper_fraction >= 0.0 && q.taper_fraction < 1.0))
        throw ValidationError("kernel quadrature taper_fraction must lie in [0, 1)");
    const int total = q.nodes_per_momentum * g.n_p;
    return std::max(1, (half ? total / 2 : total) / 4);
}

using PotentialFn = std::function<double(const double*)>;

// Kernel rows for a list of positions (d components each). Row layout as
// PotentialKernel::row. Antisymmetry in q is imposed exactly by filling the
// negative transfers from the positive ones.
std::vector<double> kernel_rows(const PotentialFn& V, const std::vector<double>& positions, const WignerGrid& g,
                                const KernelQuadrature& quad) {
    const int d = g.d;
    const int np = g.n_p;
    const int nq = 2 * np - 1;
    const std::size_t transfers = d == 1 ? std::size_t(nq) : std::size_t(nq) * nq;
    const std::size_t count = positions.size() / d;
    const double L = g.coherence_length;
    const double dp = g.dp();
    std::vector<double> rows(count * transfers, 0.0);

    if (d == 1) {
        const auto nodes = composite_gauss(0.0, L, panel_count(g, quad, true));
        const std::size_t ns = nodes.size();
        // table[m][k] = w_k sin(s_k q_m)
        std::vector<double> table(std::size_t(np) * ns);
        for (int m = 1; m < np; ++m)
            for (std::size_t k = 0; k < ns; ++k)
                table[m * ns + k] = nodes[k].w * s_window(nodes[k].s, L, quad.taper_fraction) *
                                    std::sin(nodes[k].s * m * dp / kHbar);
        const double c = -1.0 / (kPi * kHbar * kHbar);
        parallel_for(count, [&](std::size_t b, std::size_t e) {
            std::vector<double> dv(ns);
            for (std::size_t r = b; r < e; ++r) {
                const double x = positions[r];
                for (std::size_t k = 0; k < ns; ++k) {
                    const double xp = x + 0.5 * nodes[k].s, xm = x - 0.5 * nodes[k].s;
                    dv[k] = V(&xp) - V(&xm);
                }
                double* row = rows.data() + r * transfers;
                for (int m = 1; m < np; ++m) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < ns; ++k) s += table[m * ns + k] * dv[k];
                    row[np - 1 + m] = c * s;
                    row[np - 1 - m] = -c * s;
                }
            }
        });
        return rows;
    }

    // d = 2: integrate over the half plane s_x > 0 and double, using
    // sin(a + b) = sin a cos b + cos a sin b to turn the double sum into
    // matrix products.
    const auto nx_nodes = composite_gauss(0.0, L, panel_count(g, quad, true));
    const auto ny_nodes = composite_gauss(-L, L, panel_count(g, quad, false));
    const Eigen::Index nsx = Eigen::Index(nx_nodes.size()), nsy = Eigen::Index(ny_nodes.size());
    Eigen::MatrixXd Sx(nq, nsx), Cx(nq, nsx), Sy(nq, nsy), Cy(nq, nsy);
    for (int m = 0; m < nq; ++m) {
        const double q = (m - (np - 1)) * dp / kHbar;
        for (Eigen::Index k = 0; k < nsx; ++k) {
            Sx(m, k) = nx_nodes[k].w * std::sin(nx_nodes[k].s * q);
            Cx(m, k) = nx_nodes[k].w * std::cos(nx_nodes[k].s * q);
        }
        for (Eigen::Index l = 0; l < nsy; ++l) {
            Sy(m, l) = ny_nodes[l].w * std::sin(ny_nodes[l].s * q);
            Cy(m, l) = ny_nodes[l].w * std::cos(ny_nodes[l].s * q);
        }
    }
    // the window is applied per axis on the square [-L, L]^2
    std::vector<double> wx(nsx), wy(nsy);
    for (Eigen::Index k = 0; k < nsx; ++k) wx[k] = s_window(nx_nodes[k].s, L, quad.taper_fraction);
    for (Eigen::Index l = 0; l < nsy; ++l) wy[l] = s_window(ny_nodes[l].s, L, quad.taper_fraction);
    const double c = -2.0 / (kHbar * std::pow(2.0 * kPi * kHbar, 2));
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        Eigen::MatrixXd dv(nsx, nsy);
        for (std::size_t r = b; r < e; ++r) {
            const double x = positions[2 * r], y = positions[2 * r + 1];
            for (Eigen::Index k = 0; k < nsx; ++k)
                for (Eigen::Index l = 0; l < nsy; ++l) {
                    const double hx = 0.5 * nx_nodes[k].s, hy = 0.5 * ny_nodes[l].s;
                    const double p[2] = {x + hx, y + hy};
                    const double m[2] = {x - hx, y - hy};
                    dv(k, l) = wx[k] * wy[l] * (V(p) - V(m));
                }
            const Eigen::MatrixXd K = c * (Sx * dv * Cy.transpose() + Cx * dv * Sy.transpose());
            double* row = rows.data() + r * transfers;
            for (int mx = 0; mx < nq; ++mx)
                for (int my = 0; my < nq; ++my) {
                    const double a = K(mx, my), bneg = K(nq - 1 - mx, nq - 1 - my);
                    row[mx * nq + my] = 0.5 * (a - bneg);
                }
            row[(np - 1) * nq + (np - 1)] = 0.0;
        }
    });
    return rows;
}

std::vector<double> cell_positions(const WignerGrid& g) {
    std::vector<double> pos;
    if (g.d == 1) {
        for (int i = 0; i < g.n_x; ++i) pos.push_back(g.x(i));
    } else {
        for (int i = 0; i < g.n_x; ++i)
            for (int j = 0; j < g.n_x; ++j) {
                pos.push_back(g.x(i));
                pos.push_back(g.x(j));
            }
    }
    return pos;
}

std::vector<double> displacement_positions(const WignerGrid& g) {
    std::vector<double> pos;
    const double dx = g.dx();
    const int nd = 2 * g.n_x - 1;
    if (g.d == 1) {
        for (int k = 0; k < nd; ++k) pos.push_back((k - (g.n_x - 1)) * dx);
    } else {
        for (int i = 0; i < nd; ++i)
            for (int j = 0; j < nd; ++j) {
                pos.push_back((i - (g.n_x - 1)) * dx);
                pos.push_back((j - (g.n_x - 1)) * dx);
            }
    }
    return pos;
}

std::size_t transfer_index(const WignerGrid& g, int mx, int my) {
    const int nq = 2 * g.n_p - 1;
    if (g.d == 1) return std::size_t(mx + g.n_p - 1);
    return std::size_t(mx + g.n_p - 1) * nq + std::size_t(my + g.n_p - 1);
}

}  // namespace

PotentialKernel::PotentialKernel(WignerGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    const std::size_t nq = grid_.transfer_count();
    transfers_ = grid_.d == 1 ? nq : nq * nq;
    if (values_.size() != grid_.position_cells() * transfers_)
        throw ValidationError("PotentialKernel: value count does not match the grid");
    finalize();
}

PotentialKernel PotentialKernel::zero(const WignerGrid& grid) {
    const std::size_t nq = grid.transfer_count();
    const std::size_t t = grid.d == 1 ? nq : nq * nq;
    return PotentialKernel(grid, std::vector<double>(grid.position_cells() * t, 0.0));
}

double PotentialKernel::value(std::size_t r, int mx, int my) const {
    return values_[r * transfers_ + transfer_index(grid_, mx, my)];
}

double PotentialKernel::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

void PotentialKernel::finalize() {
    zero_ = true;
    for (double v : values_)
        if (v != 0.0) {
            zero_ = false;
            break;
        }
    const std::size_t R = grid_.position_cells(), Q = grid_.momentum_cells();
    const int np = grid_.n_p;
    const double dpd = std::pow(grid_.dp(), grid_.d);
    wrapped_.assign(R * Q, 0.0);
    if (zero_) return;
    auto outside = [np](int n, int m) { return n + m < 0 || n + m >= np; };
    for (std::size_t r = 0; r < R; ++r) {
        const double* row = values_.data() + r * transfers_;
        for (std::size_t n = 0; n < Q; ++n) {
            double s = 0.0;
            if (grid_.d == 1) {
                for (int m = -(np - 1); m < np; ++m)
                    if (outside(int(n), m)) s += std::abs(row[m + np - 1]);
            } else {
                const int nx = int(n) / np, ny = int(n) % np;
                for (int mx = -(np - 1); mx < np; ++mx)
                    for (int my = -(np - 1); my < np; ++my)
                        if (outside(nx, mx) || outside(ny, my)) s += std::abs(row[transfer_index(grid_, mx, my)]);
            }
            wrapped_[r * Q + n] = dpd * s;
        }
    }
}

std::vector<double> PotentialKernel::periodic_row(std::size_t r) const {
    const int np = grid_.n_p;
    const auto row = this->row(r);
    if (grid_.d == 1) {
        std::vector<double> out(np, 0.0);
        for (int m = -(np - 1); m < np; ++m) out[((m % np) + np) % np] += row[m + np - 1];
        return out;
    }
    std::vector<double> out(std::size_t(np) * np, 0.0);
    for (int mx = -(np - 1); mx < np; ++mx)
        for (int my = -(np - 1); my < np; ++my)
            out[std::size_t(((mx % np) + np) % np) * np + ((my % np) + np) % np] += row[transfer_index(grid_, mx, my)];
    return out;
}

PotentialKernel wigner_kernel_1e(const PotentialSpec& spec, const WignerGrid& grid, const KernelQuadrature& quad) {
    grid.validate();
    spec.validate(grid.d);
    if (spec.kind == PotentialKind::none) return PotentialKernel::zero(grid);
    if (spec.kind == PotentialKind::tabulated) {
        const double lo = grid.x(0) - 0.5 * grid.coherence_length;
        const double hi = grid.x(grid.n_x - 1) + 0.5 * grid.coherence_length;
        const double tlo = spec.table_x0, thi = spec.table_x0 + spec.table_dx * double(spec.samples.size() - 1);
        if (tlo > lo + 1e-12 || thi < hi - 1e-12)
            throw ValidationError(fmt::format(
                "tabulated potential covers [{:.6g}, {:.6g}] but the kernel needs [{:.6g}, {:.6g}]", tlo, thi, lo, hi));
    }
    const int d = grid.d;
    PotentialFn V = [&spec, d](const double* r) { return spec.value(std::span<const double>(r, d)); };
    return PotentialKernel(grid, kernel_rows(V, cell_positions(grid), grid, quad));
}

PairKernelTable::PairKernelTable(const UnitSystem& units, const PotentialSpec& spec, const WignerGrid& grid,
                                 const KernelQuadrature& quad)
    : grid_(grid), lambda_(units.coupling_lambda), kind_(spec.kind), eps_(spec.softening) {
    units.validate();
    grid.validate();
    if (!spec.is_coulomb()) throw ValidationError("pair kernel: interaction kind must be coulomb2d or coulomb3d");
    spec.validate(grid.d);
    const std::size_t nq = grid.transfer_count();
    transfers_ = grid.d == 1 ? nq : nq * nq;
    const std::size_t nd = 2 * std::size_t(grid.n_x) - 1;
    displacements_ = grid.d == 1 ? nd : nd * nd;
    if (lambda_ == 0.0) {
        values_.assign(displacements_ * transfers_, 0.0);
        return;
    }
    const int d = grid.d;
    const PotentialKind kind = kind_;
    const double lam = lambda_, eps = eps_;
    PotentialFn V = [kind, lam, eps, d](const double* r) {
        double rho2 = 0.0;
        for (int a = 0; a < d; ++a) rho2 += r[a] * r[a];
        return pair_potential(kind, lam, eps, std::sqrt(rho2));
    };
    values_ = kernel_rows(V, displacement_positions(grid), grid, quad);
}

std::shared_ptr<const PairKernelTable> pair_kernel_table(const UnitSystem& units, const PotentialSpec& spec,
                                                         const WignerGrid& grid) {
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const PairKernelTable>> cache;
    const std::string key = fmt::format("{:.17g}|{}|{:.17g}|{}", units.coupling_lambda, to_string(spec.kind),
                                        spec.softening, grid.describe());
    {
        std::lock_guard lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto table = std::make_shared<const PairKernelTable>(units, spec, grid);
    std::lock_guard lock(mutex);
    if (cache.size() > 16) cache.clear();
    cache.emplace(key, table);
    return table;
}

MomentumLine momentum_line(int n_p, int c) {
    const int first = std::max(0, c - (n_p - 1));
    const int last = std::min(c, n_p - 1);
    return {first, last - first + 1};
}

void fold_onto_line(std::span<const double> row, int n_p, int length, std::vector<double>& out) {
    out.assign(length, 0.0);
    for (int m = -(n_p - 1); m < n_p; ++m) out[((m % length) + length) % length] += row[m + n_p - 1];
}

InteractionKernel::InteractionKernel(std::shared_ptr<const PairKernelTable> table) : table_(std::move(table)) {
    const WignerGrid& g = table_->grid();
    if (g.d != 1) throw ValidationError("two-electron grid kernels are limited to d = 1");
    const int np = g.n_p;
    const double dp = g.dp();
    wrapped_.assign(table_->displacement_count() * np * np, 0.0);
    if (table_->is_zero()) return;
    for (std::size_t disp = 0; disp < table_->displacement_count(); ++disp) {
        const auto row = table_->row(disp);
        for (int n1 = 0; n1 < np; ++n1)
            for (int n2 = 0; n2 < np; ++n2) {
                // transfers (m, -m) with n1 + m or n2 - m outside the window
                const int lo = std::max(-n1, n2 - (np - 1));
                const int hi = std::min(np - 1 - n1, n2);
                double s = 0.0;
                for (int m = -(np - 1); m < np; ++m)
                    if (m < lo || m > hi) s += std::abs(row[m + np - 1]);
                wrapped_[(disp * np + n1) * np + n2] = dp * s;
            }
    }
}

double InteractionKernel::diagonal(std::size_t disp, int m) const {
    return table_->row(disp)[m + table_->grid().n_p - 1];
}

double InteractionKernel::value(int m1, int m2, int i1, int i2) const {
    if (m1 + m2 != 0) return 0.0;
    const WignerGrid& g = grid();
    return diagonal(std::size_t(i1 - i2 + g.n_x - 1), m1) / g.dp();
}

double InteractionKernel::wrapped_weight(std::size_t disp, std::size_t n1, std::size_t n2) const {
    const std::size_t np = grid().n_p;
    return wrapped_[(disp * np + n1) * np + n2];
}

InteractionKernel coulomb_kernel_2e(const UnitSystem& units, const PotentialSpec& spec, const WignerGrid& grid) {
    if (!spec.is_coulomb()) throw ValidationError("coulomb_kernel_2e: kind must be coulomb2d or coulomb3d");
    if (!(spec.softening > 0.0)) throw ValidationError("coulomb_kernel_2e: softening must be > 0");
    return InteractionKernel(pair_kernel_table(units, spec, grid));
}

double coulomb_wigner_kernel_direct(const UnitSystem& units, const PotentialSpec& spec, const WignerGrid& grid,
                                    int m1, int m2, int i1, int i2, const KernelQuadrature& quad) {
    units.validate();
    spec.validate(1);
    if (grid.d != 1) throw ValidationError("coulomb_wigner_kernel_direct: d = 1 only");
    if (!spec.is_coulomb()) throw ValidationError("coulomb_wigner_kernel_direct: Coulomb kind required");
    const double L = grid.coherence_length;
    const double dp = grid.dp();
    const double q1 = m1 * dp, q2 = m2 * dp;
    const double delta = grid.x(i1) - grid.x(i2);
    const auto u_nodes = composite_gauss(-L, L, panel_count(grid, quad, false));
    const int nw = quad.nodes_per_momentum * grid.n_p;
    const double hw = 2.0 * L / nw;
    using cd = std::complex<double>;
    const double lam = units.coupling_lambda;
    std::vector<cd> wu(u_nodes.size());
    for (std::size_t k = 0; k < u_nodes.size(); ++k) {
        const double u = u_nodes[k].s;
        const double dv = pair_potential(spec.kind, lam, spec.softening, std::abs(delta + 0.5 * u)) -
                          pair_potential(spec.kind, lam, spec.softening, std::abs(delta - 0.5 * u));
        wu[k] = u_nodes[k].w * s_window(u, L, quad.taper_fraction) * dv * std::exp(cd(0.0, -u * 0.5 * (q1 - q2) / kHbar));
    }
    cd total = 0.0;
    for (int j = 0; j < nw; ++j) {
        const double w = -L + (j + 0.5) * hw;
        const cd phase = hw * std::exp(cd(0.0, -w * (q1 + q2) / kHbar));
        for (const cd& v : wu) total += phase * v;
    }
    const cd pref = 1.0 / (cd(0.0, kHbar) * std::pow(2.0 * kPi * kHbar, 2));
    return (pref * total).real();
}

std::vector<double> position_density(const WignerState& f) {
    if (f.arity() != Arity::one) throw ValidationError("position_density: one-electron state required");
    const WignerGrid& g = f.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    const double dpd = std::pow(g.dp(), g.d);
    std::vector<double> n(R, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        double s = 0.0;
        for (std::size_t q = 0; q < Q; ++q) s += f[r * Q + q];
        n[r] = s * dpd;
    }
    return n;
}

PotentialKernel reduced_kernel(const WignerState& f_other, const PairKernelTable& table, bool require_normalized) {
    if (f_other.arity() != Arity::one) throw ValidationError("reduced_kernel: one-electron state required");
    const WignerGrid& g = f_other.grid();
    if (!(g == table.grid())) throw ValidationError("reduced_kernel: state and kernel table grids differ");
    if (require_normalized && std::abs(f_other.integral() - 1.0) > 1e-6)
        throw ValidationError("reduced_kernel: f_other is not normalized");
    if (table.is_zero()) return PotentialKernel::zero(g);
    const auto n2 = position_density(f_other);
    const std::size_t R = g.position_cells();
    const std::size_t T = table.transfers();
    const double dxd = std::pow(g.dx(), g.d);
    const int n = g.n_x, nd = 2 * n - 1;
    std::vector<double> values(R * T, 0.0);
    parallel_for(R, [&](std::size_t b, std::size_t e) {
        for (std::size_t r1 = b; r1 < e; ++r1) {
            double* out = values.data() + r1 * T;
            for (std::size_t r2 = 0; r2 < R; ++r2) {
                const double w = dxd * n2[r2];
                if (w == 0.0) continue;
                std::size_t disp;
                if (g.d == 1) {
                    disp = std::size_t(int(r1) - int(r2) + n - 1);
                } else {
                    const int ix = int(r1) / n - int(r2) / n + n - 1;
                    const int iy = int(r1) % n - int(r2) % n + n - 1;
                    disp = std::size_t(ix) * nd + std::size_t(iy);
                }
                const auto row = table.row(disp);
                for (std::size_t q = 0; q < T; ++q) out[q] += w * row[q];
            }
        }
    });
    return PotentialKernel(g, std::move(values));
}

PotentialKernel reduced_kernel(const WignerState& f_other, const UnitSystem& units, const PotentialSpec& spec,
                               const WignerGrid& grid) {
    if (!(f_other.grid() == grid)) throw ValidationError("reduced_kernel: state grid differs from the requested grid");
    return reduced_kernel(f_other, *pair_kernel_table(units, spec, grid));
}

namespace {

// Dense generator G[n][n'] of the periodic convolution at one position cell.
void generator(const PotentialKernel& K, std::size_t r, std::vector<double>& G) {
    const WignerGrid& g = K.grid();
    const std::size_t Q = g.momentum_cells();
    const int np = g.n_p;
    const double dpd = std::pow(g.dp(), g.d);
    G.assign(Q * Q, 0.0);
    const auto kp = K.periodic_row(r);
    auto wrap = [np](int j) { return (j + np) % np; };
    if (g.d == 1) {
        for (int n = 0; n < np; ++n)
            for (int m = 0; m < np; ++m) G[std::size_t(n) * Q + m] = dpd * kp[wrap(n - m)];
    } else {
        for (int nx = 0; nx < np; ++nx)
            for (int ny = 0; ny < np; ++ny) {
                double* gr = G.data() + std::size_t(nx * np + ny) * Q;
                for (int mx = 0; mx < np; ++mx)
                    for (int my = 0; my < np; ++my)
                        gr[mx * np + my] = dpd * kp[std::size_t(wrap(nx - mx)) * np + wrap(ny - my)];
            }
    }
}

double clipped_weight_1e(const PotentialKernel& K, const WignerState& f, int electron) {
    const WignerGrid& g = f.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    double c = 0.0;
    if (f.arity() == Arity::one) {
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t n = 0; n < Q; ++n) c += K.wrapped_weight(r, n) * std::abs(f[r * Q + n]);
    } else {
        for (std::size_t rr = 0; rr < R * R; ++rr) {
            const std::size_t r = electron == 1 ? rr / R : rr % R;
            for (std::size_t n1 = 0; n1 < Q; ++n1)
                for (std::size_t n2 = 0; n2 < Q; ++n2)
                    c += K.wrapped_weight(r, electron == 1 ? n1 : n2) * std::abs(f[(rr * Q + n1) * Q + n2]);
        }
    }
    return c * f.cell_volume();
}

}  // namespace

WignerState apply_kernel(const PotentialKernel& K, const WignerState& f, double* clipped) {
    if (f.arity() != Arity::one) throw ValidationError("apply_kernel: one-electron kernel needs a one-electron state");
    if (!(f.grid() == K.grid())) throw ValidationError("apply_kernel: kernel and state grids differ");
    WignerState out = WignerState::zeros(f.grid(), Arity::one, f.time());
    if (clipped) *clipped = 0.0;
    if (K.is_zero()) return out;
    const WignerGrid& g = f.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    parallel_for(R, [&](std::size_t b, std::size_t e) {
        std::vector<double> G;
        for (std::size_t r = b; r < e; ++r) {
            generator(K, r, G);
            const double* in = f.data() + r * Q;
            double* o = out.data() + r * Q;
            for (std::size_t n = 0; n < Q; ++n) {
                const double* gr = G.data() + n * Q;
                double s = 0.0;
                for (std::size_t m = 0; m < Q; ++m) s += gr[m] * in[m];
                o[n] = s;
            }
        }
    });
    if (clipped) *clipped = clipped_weight_1e(K, f, 1);
    return out;
}

WignerState apply_kernel_to_electron(const PotentialKernel& K, const WignerState& f, int electron, double* clipped) {
    if (f.arity() != Arity::two) throw ValidationError("apply_kernel_to_electron: two-electron state required");
    if (electron != 1 && electron != 2) throw ValidationError("apply_kernel_to_electron: electron must be 1 or 2");
    if (!(f.grid() == K.grid())) throw ValidationError("apply_kernel_to_electron: kernel and state grids differ");
    WignerState out = WignerState::zeros(f.grid(), Arity::two, f.time());
    if (clipped) *clipped = 0.0;
    if (K.is_zero()) return out;
    const WignerGrid& g = f.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    // Generators are stored per position cell of the acting electron.
    std::vector<std::vector<double>> gens(R);
    parallel_for(R, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) generator(K, r, gens[r]);
    });
    parallel_for(R * R, [&](std::size_t b, std::size_t e) {
        for (std::size_t rr = b; rr < e; ++rr) {
            const std::size_t r1 = rr / R, r2 = rr % R;
            const double* in = f.data() + rr * Q * Q;
            double* o = out.data() + rr * Q * Q;
            if (electron == 1) {
                const double* G = gens[r1].data();
                for (std::size_t n = 0; n < Q; ++n) {
                    double* orow = o + n * Q;
                    for (std::size_t m = 0; m < Q; ++m) {
                        const double c = G[n * Q + m];
                        if (c == 0.0) continue;
                        const double* irow = in + m * Q;
                        for (std::size_t k = 0; k < Q; ++k) orow[k] += c * irow[k];
                    }
                }
            } else {
                const double* G = gens[r2].data();
                for (std::size_t n1 = 0; n1 < Q; ++n1) {
                    const double* irow = in + n1 * Q;
                    double* orow = o + n1 * Q;
                    for (std::size_t n = 0; n < Q; ++n) {
                        const double* gr = G + n * Q;
                        double s = 0.0;
                        for (std::size_t m = 0; m < Q; ++m) s += gr[m] * irow[m];
                        orow[n] = s;
                    }
                }
            }
        }
    });
    if (clipped) *clipped = clipped_weight_1e(K, f, electron);
    return out;
}

WignerState apply_kernel(const InteractionKernel& K, const WignerState& f, double* clipped) {
    if (f.arity() != Arity::two) throw ValidationError("apply_kernel: interaction kernel needs a two-electron state");
    if (K.is_zero()) {
        if (clipped) *clipped = 0.0;
        return WignerState::zeros(f.grid(), Arity::two, f.time());
    }
    if (!(f.grid() == K.grid())) throw ValidationError("apply_kernel: kernel and state grids differ");
    const WignerGrid& g = f.grid();
    const int nx = g.n_x, np = g.n_p;
    const double dp = g.dp();
    WignerState out = WignerState::zeros(g, Arity::two, f.time());
    const std::size_t block = std::size_t(np) * np;
    parallel_for(std::size_t(nx) * nx, [&](std::size_t b, std::size_t e) {
        std::vector<double> kl;
        for (std::size_t rr = b; rr < e; ++rr) {
            const int i1 = int(rr) / nx, i2 = int(rr) % nx;
            const auto row = K.table().row(std::size_t(i1 - i2 + nx - 1));
            const double* in = f.data() + rr * block;
            double* o = out.data() + rr * block;
            for (int c = 0; c <= 2 * (np - 1); ++c) {
                const auto line = momentum_line(np, c);
                fold_onto_line(row, np, line.length, kl);
                for (int t = 0; t < line.length; ++t) {
                    double s = 0.0;
                    for (int u = 0; u < line.length; ++u) {
                        const int n1 = line.first + u;
                        s += kl[(t - u + line.length) % line.length] * in[n1 * np + (c - n1)];
                    }
                    const int n1 = line.first + t;
                    o[n1 * np + (c - n1)] = dp * s;
                }
            }
        }
    });
    if (clipped) {
        double c = 0.0;
        for (std::size_t rr = 0; rr < std::size_t(nx) * nx; ++rr) {
            const std::size_t disp = std::size_t(int(rr) / nx - int(rr) % nx + nx - 1);
            for (int n1 = 0; n1 < np; ++n1)
                for (int n2 = 0; n2 < np; ++n2)
                    c += K.wrapped_weight(disp, n1, n2) * std::abs(f[rr * block + n1 * np + n2]);
        }
        *clipped = c * f.cell_volume();
    }
    return out;
}

namespace {

void write_rows(std::ostream& os, std::span<const double> values, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) os << (c ? "," : "") << fmt::format("{:.17g}", values[r * cols + c]);
        os << '\n';
    }
}

}  // namespace

void write_kernel_csv(const PotentialKernel& K, std::ostream& os) {
    const WignerGrid& g = K.grid();
    os << "# one-electron wigner kernel; rows = position cells (row-major), columns = transfers m"
       << (g.d == 1 ? "" : " (mx-major)") << " from -(n_p-1) to n_p-1\n";
    os << "# " << g.describe() << '\n';
    write_rows(os, K.values(), g.position_cells(), K.transfers());
}

void write_kernel_csv(const PairKernelTable& T, std::ostream& os) {
    const WignerGrid& g = T.grid();
    os << "# pair wigner kernel; rows = displacements (i1-i2+n_x-1, row-major), columns = transfers m\n";
    os << fmt::format("# {} lambda={:.17g} kind={} softening={:.17g}\n", g.describe(), T.coupling(),
                      to_string(T.kind()), T.softening());
    for (std::size_t r = 0; r < T.displacement_count(); ++r) {
        const auto row = T.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << fmt::format("{:.17g}", row[c]);
        os << '\n';
    }
}

}  // namespace wigner2e
