#include "wigner2e/core.hpp"

#include <cmath>
#include <fmt/format.h>

#include "wigner2e/parallel.hpp"

namespace wigner2e {

void UnitSystem::validate() const {
    if (hbar != 1.0 || mass != 1.0 || charge != 1.0)
        throw ValidationError("units: hbar, mass and charge are fixed to 1");
    if (!(coupling_lambda >= 0.0) || !std::isfinite(coupling_lambda))
        throw ValidationError("units: coupling_lambda must be finite and >= 0");
}

WignerGrid WignerGrid::make(int d, int n_x, double x_min, double x_max, double coherence_length, int n_p) {
    WignerGrid g{d, n_x, x_min, x_max, coherence_length, n_p};
    g.validate();
    return g;
}

void WignerGrid::validate() const {
    if (d != 1 && d != 2) throw ValidationError("grid: d must be 1 or 2");
    if (n_x < 4) throw ValidationError("grid: n_x must be >= 4");
    if (n_p < 4 || n_p % 2 != 0) throw ValidationError("grid: n_p must be even and >= 4");
    if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
        throw ValidationError("grid: x_max must exceed x_min");
    if (!(coherence_length > 0.0) || !std::isfinite(coherence_length))
        throw ValidationError("grid: coherence_length must be positive");
}

std::size_t WignerGrid::position_cells() const {
    return d == 1 ? std::size_t(n_x) : std::size_t(n_x) * n_x;
}

std::size_t WignerGrid::momentum_cells() const {
    return d == 1 ? std::size_t(n_p) : std::size_t(n_p) * n_p;
}

double WignerGrid::cell_volume() const {
    return std::pow(dx() * dp(), d);
}

std::string WignerGrid::describe() const {
    return fmt::format("d={} n_x={} x_min={:.17g} x_max={:.17g} coherence_length={:.17g} n_p={}", d, n_x, x_min,
                       x_max, coherence_length, n_p);
}

int position_axis(int d, Arity arity, int electron, int component) {
    const int e = static_cast<int>(arity);
    if (electron < 1 || electron > e || component < 0 || component >= d)
        throw ValidationError("position_axis: index out of range");
    return (electron - 1) * d + component;
}

int momentum_axis(int d, Arity arity, int electron, int component) {
    const int e = static_cast<int>(arity);
    if (electron < 1 || electron > e || component < 0 || component >= d)
        throw ValidationError("momentum_axis: index out of range");
    return e * d + (electron - 1) * d + component;
}

namespace {

std::size_t state_size(const WignerGrid& g, Arity arity) {
    std::size_t per = g.position_cells() * g.momentum_cells();
    return arity == Arity::one ? per : per * per;
}

}  // namespace

WignerState::WignerState(WignerGrid grid, Arity arity, std::vector<double> values, double time)
    : grid_(grid), arity_(arity), values_(std::move(values)), time_(time) {
    grid_.validate();
    if (values_.size() != state_size(grid_, arity_))
        throw ValidationError(fmt::format("WignerState: expected {} values, got {}", state_size(grid_, arity_),
                                          values_.size()));
}

WignerState WignerState::zeros(const WignerGrid& grid, Arity arity, double time) {
    grid.validate();
    return WignerState(grid, arity, std::vector<double>(state_size(grid, arity), 0.0), time);
}

std::vector<int> WignerState::shape() const {
    std::vector<int> s;
    const int e = electrons();
    for (int k = 0; k < e * grid_.d; ++k) s.push_back(grid_.n_x);
    for (int k = 0; k < e * grid_.d; ++k) s.push_back(grid_.n_p);
    return s;
}

double WignerState::cell_volume() const {
    return std::pow(grid_.cell_volume(), electrons());
}

double WignerState::integral() const {
    const double* v = values_.data();
    return ordered_sum(values_.size(), [v](std::size_t i) { return v[i]; }) * cell_volume();
}

double WignerState::l2_norm() const {
    const double* v = values_.data();
    return std::sqrt(ordered_sum(values_.size(), [v](std::size_t i) { return v[i] * v[i]; }) * cell_volume());
}

bool WignerState::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

void WignerState::coordinates(std::size_t index, std::span<double> out) const {
    const int na = axis_count();
    const int npos = na / 2;
    for (int a = na - 1; a >= 0; --a) {
        const int n = a >= npos ? grid_.n_p : grid_.n_x;
        const int k = static_cast<int>(index % n);
        index /= n;
        out[a] = a >= npos ? grid_.p(k) : grid_.x(k);
    }
}

void require_same_grid(const WignerState& a, const WignerState& b, const char* where) {
    if (!(a.grid() == b.grid()) || a.arity() != b.arity())
        throw ValidationError(fmt::format("{}: states live on different grids", where));
}

WignerState& WignerState::operator+=(const WignerState& o) {
    require_same_grid(*this, o, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

WignerState& WignerState::operator-=(const WignerState& o) {
    require_same_grid(*this, o, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

WignerState& WignerState::operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
}

void WignerState::axpy(double c, const WignerState& o) {
    require_same_grid(*this, o, "axpy");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += c * o.values_[i];
}

WignerState operator+(WignerState a, const WignerState& b) { return a += b; }
WignerState operator-(WignerState a, const WignerState& b) { return a -= b; }
WignerState operator*(double c, WignerState a) { return a *= c; }

void GaussianPacket::validate(int d) const {
    if (center_r.size() != std::size_t(d) || center_p.size() != std::size_t(d) || sigma.size() != std::size_t(d))
        throw ValidationError(fmt::format("GaussianPacket: expected {} components per vector", d));
    for (int a = 0; a < d; ++a) {
        if (!(sigma[a] > 0.0) || !std::isfinite(sigma[a])) throw ValidationError("GaussianPacket: sigma must be > 0");
        if (!std::isfinite(center_r[a]) || !std::isfinite(center_p[a]))
            throw ValidationError("GaussianPacket: centre must be finite");
    }
}

double gaussian_wigner(const GaussianPacket& packet, std::span<const double> r, std::span<const double> p) {
    double expo = 0.0;
    const std::size_t d = packet.sigma.size();
    for (std::size_t a = 0; a < d; ++a) {
        const double s = packet.sigma[a];
        const double dx = r[a] - packet.center_r[a];
        const double dq = p[a] - packet.center_p[a];
        expo += dx * dx / (2.0 * s * s) + 2.0 * s * s * dq * dq / (kHbar * kHbar);
    }
    return std::pow(kPi * kHbar, -static_cast<double>(d)) * std::exp(-expo);
}

namespace {

void check_margin(const WignerGrid& g, double c, double s, double lo, double hi, const char* what) {
    if (c - 3.0 * s < lo || c + 3.0 * s > hi)
        throw DomainError(fmt::format("{} centre {:.6g} with spread {:.6g} violates the 3-sigma margin of [{:.6g}, {:.6g}]",
                                      what, c, s, lo, hi));
    (void)g;
}

// Fill a one-electron state from a separable per-axis density.
template <class Fx, class Fp>
WignerState fill_separable(const WignerGrid& g, Fx&& fx, Fp&& fp) {
    WignerState f = WignerState::zeros(g, Arity::one);
    const int d = g.d;
    std::vector<std::vector<double>> ax(d), ap(d);
    for (int a = 0; a < d; ++a) {
        for (int i = 0; i < g.n_x; ++i) ax[a].push_back(fx(a, g.x(i)));
        for (int n = 0; n < g.n_p; ++n) ap[a].push_back(fp(a, g.p(n)));
    }
    const std::size_t Q = g.momentum_cells();
    double* v = f.data();
    if (d == 1) {
        for (int i = 0; i < g.n_x; ++i)
            for (int n = 0; n < g.n_p; ++n) v[i * Q + n] = ax[0][i] * ap[0][n];
    } else {
        for (int i = 0; i < g.n_x; ++i)
            for (int j = 0; j < g.n_x; ++j)
                for (int n = 0; n < g.n_p; ++n)
                    for (int m = 0; m < g.n_p; ++m)
                        v[(std::size_t(i) * g.n_x + j) * Q + std::size_t(n) * g.n_p + m] =
                            ax[0][i] * ax[1][j] * ap[0][n] * ap[1][m];
    }
    const double z = f.integral();
    if (!(z > 0.0)) throw DomainError("state has no weight on the grid");
    f *= 1.0 / z;
    return f;
}

}  // namespace

WignerState make_gaussian_state(const GaussianPacket& packet, const WignerGrid& grid) {
    grid.validate();
    packet.validate(grid.d);
    for (int a = 0; a < grid.d; ++a) {
        check_margin(grid, packet.center_r[a], packet.sigma[a], grid.x_min, grid.x_max, "position");
        check_margin(grid, packet.center_p[a], packet.sigma_p(a), -grid.p_max(), grid.p_max(), "momentum");
    }
    return fill_separable(
        grid,
        [&](int a, double x) {
            const double u = (x - packet.center_r[a]) / packet.sigma[a];
            return std::exp(-0.5 * u * u);
        },
        [&](int a, double p) {
            const double u = (p - packet.center_p[a]) * packet.sigma[a] / kHbar;
            return std::exp(-2.0 * u * u) / (kPi * kHbar);
        });
}

WignerState make_phase_space_gaussian(std::span<const double> center_r, std::span<const double> center_p,
                                      std::span<const double> sigma_r, std::span<const double> sigma_p,
                                      const WignerGrid& grid) {
    grid.validate();
    const std::size_t d = grid.d;
    if (center_r.size() != d || center_p.size() != d || sigma_r.size() != d || sigma_p.size() != d)
        throw ValidationError("make_phase_space_gaussian: component count mismatch");
    for (std::size_t a = 0; a < d; ++a) {
        if (!(sigma_r[a] > 0.0) || !(sigma_p[a] > 0.0))
            throw ValidationError("make_phase_space_gaussian: spreads must be > 0");
        if (sigma_r[a] * sigma_p[a] < 0.5 * kHbar * (1.0 - 1e-12))
            throw ValidationError("make_phase_space_gaussian: spreads violate the uncertainty bound");
        check_margin(grid, center_r[a], sigma_r[a], grid.x_min, grid.x_max, "position");
        check_margin(grid, center_p[a], sigma_p[a], -grid.p_max(), grid.p_max(), "momentum");
    }
    return fill_separable(
        grid,
        [&](int a, double x) {
            const double u = (x - center_r[a]) / sigma_r[a];
            return std::exp(-0.5 * u * u);
        },
        [&](int a, double p) {
            const double u = (p - center_p[a]) / sigma_p[a];
            return std::exp(-0.5 * u * u);
        });
}

WignerState mixture(std::span<const WignerState> states, std::span<const double> weights) {
    if (states.empty() || states.size() != weights.size())
        throw ValidationError("mixture: need one weight per state");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ValidationError("mixture: weights must be nonnegative");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12) throw ValidationError("mixture: weights must sum to 1");
    WignerState out = WignerState::zeros(states[0].grid(), states[0].arity());
    for (std::size_t k = 0; k < states.size(); ++k) out.axpy(weights[k], states[k]);
    return out;
}

WignerState tensor_product(const WignerState& f1, const WignerState& f2) {
    if (f1.arity() != Arity::one || f2.arity() != Arity::one)
        throw ValidationError("tensor_product: both factors must be one-electron states");
    if (!(f1.grid() == f2.grid())) throw ValidationError("tensor_product: factors live on different grids");
    const WignerGrid& g = f1.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    WignerState out = WignerState::zeros(g, Arity::two, f1.time());
    double* o = out.data();
    const double* a = f1.data();
    const double* b = f2.data();
    parallel_for(R, [&](std::size_t r1b, std::size_t r1e) {
        for (std::size_t r1 = r1b; r1 < r1e; ++r1)
            for (std::size_t r2 = 0; r2 < R; ++r2)
                for (std::size_t p1 = 0; p1 < Q; ++p1) {
                    const double av = a[r1 * Q + p1];
                    double* row = o + ((r1 * R + r2) * Q + p1) * Q;
                    const double* brow = b + r2 * Q;
                    for (std::size_t p2 = 0; p2 < Q; ++p2) row[p2] = av * brow[p2];
                }
    });
    return out;
}

WignerState marginal(const WignerState& f, int keep) {
    if (f.arity() != Arity::two) throw ValidationError("marginal: input must be a two-electron state");
    if (keep != 1 && keep != 2) throw ValidationError("marginal: keep must be 1 or 2");
    const WignerGrid& g = f.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    const double vol = g.cell_volume();
    WignerState out = WignerState::zeros(g, Arity::one, f.time());
    double* o = out.data();
    const double* v = f.data();
    if (keep == 1) {
        parallel_for(R, [&](std::size_t r1b, std::size_t r1e) {
            for (std::size_t r1 = r1b; r1 < r1e; ++r1)
                for (std::size_t p1 = 0; p1 < Q; ++p1) {
                    double s = 0.0;
                    for (std::size_t r2 = 0; r2 < R; ++r2) {
                        const double* row = v + ((r1 * R + r2) * Q + p1) * Q;
                        for (std::size_t p2 = 0; p2 < Q; ++p2) s += row[p2];
                    }
                    o[r1 * Q + p1] = s * vol;
                }
        });
    } else {
        parallel_for(R, [&](std::size_t r2b, std::size_t r2e) {
            for (std::size_t r2 = r2b; r2 < r2e; ++r2) {
                double* orow = o + r2 * Q;
                for (std::size_t r1 = 0; r1 < R; ++r1)
                    for (std::size_t p1 = 0; p1 < Q; ++p1) {
                        const double* row = v + ((r1 * R + r2) * Q + p1) * Q;
                        for (std::size_t p2 = 0; p2 < Q; ++p2) orow[p2] += row[p2];
                    }
                for (std::size_t p2 = 0; p2 < Q; ++p2) orow[p2] *= vol;
            }
        });
    }
    return out;
}

Polynomial Polynomial::constant(double c) {
    Polynomial p;
    p.terms_.push_back({c, {}});
    return p;
}

Polynomial Polynomial::axis(int axis, int power) {
    if (axis < 0 || power < 0) throw ValidationError("Polynomial::axis: negative index");
    Polynomial p;
    Monomial m;
    m.powers.assign(axis + 1, 0);
    m.powers[axis] = power;
    p.terms_.push_back(m);
    return p;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial r = *this;
    r.terms_.insert(r.terms_.end(), o.terms_.begin(), o.terms_.end());
    return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial r;
    for (const auto& a : terms_)
        for (const auto& b : o.terms_) {
            Monomial m;
            m.coefficient = a.coefficient * b.coefficient;
            m.powers.assign(std::max(a.powers.size(), b.powers.size()), 0);
            for (std::size_t k = 0; k < a.powers.size(); ++k) m.powers[k] += a.powers[k];
            for (std::size_t k = 0; k < b.powers.size(); ++k) m.powers[k] += b.powers[k];
            r.terms_.push_back(m);
        }
    return r;
}

Polynomial Polynomial::operator*(double c) const {
    Polynomial r = *this;
    for (auto& t : r.terms_) t.coefficient *= c;
    return r;
}

int Polynomial::degree() const {
    int deg = 0;
    for (const auto& t : terms_) {
        int s = 0;
        for (int k : t.powers) s += k;
        deg = std::max(deg, s);
    }
    return deg;
}

double Polynomial::evaluate(std::span<const double> z) const {
    double total = 0.0;
    for (const auto& t : terms_) {
        double v = t.coefficient;
        for (std::size_t k = 0; k < t.powers.size(); ++k)
            for (int e = 0; e < t.powers[k]; ++e) v *= z[k];
        total += v;
    }
    return total;
}

namespace {

double observable_sum(const WignerState& f, const Polynomial& observable) {
    if (observable.degree() > 4) throw ValidationError("moment: observable degree must be <= 4");
    for (const auto& t : observable.terms())
        if (t.powers.size() > std::size_t(f.axis_count()))
            throw ValidationError("moment: observable uses an axis the state does not have");
    const int na = f.axis_count();
    const double* v = f.data();
    return ordered_sum(f.size(), [&](std::size_t i) {
        if (v[i] == 0.0) return 0.0;
        double z[8];
        f.coordinates(i, std::span<double>(z, na));
        return observable.evaluate(std::span<const double>(z, na)) * v[i];
    });
}

}  // namespace

double integrate_observable(const WignerState& f, const Polynomial& observable) {
    return observable_sum(f, observable) * f.cell_volume();
}

double moment(const WignerState& f, const Polynomial& observable) {
    const double num = observable_sum(f, observable);
    const double* v = f.data();
    const double den = ordered_sum(f.size(), [v](std::size_t i) { return v[i]; });
    if (den == 0.0) throw DomainError("moment: state has zero integral");
    return num / den;
}

}  // namespace wigner2e
