#include "wigner2e/bbgky.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "wigner2e/advection.hpp"
#include "wigner2e/errors.hpp"

namespace wigner2e {

void CoupledState::validate(double tol) const {
    if (f1.arity() != Arity::one || f2.arity() != Arity::one)
        throw ValidationError("CoupledState: both factors must be one-electron states");
    require_same_grid(f1, f2, "CoupledState");
    if (std::abs(f1.integral() - 1.0) > tol || std::abs(f2.integral() - 1.0) > tol)
        throw ValidationError(fmt::format("CoupledState: factors not normalized (integrals {:.8g}, {:.8g})",
                                          f1.integral(), f2.integral()));
}

WignerState CoupledState::pair_state() const {
    WignerState p = tensor_product(f1, f2);
    p.set_time(time);
    return p;
}

void BbgkyConfig::validate() const {
    units.validate();
    if (refresh_every < 1) throw ValidationError("BbgkyConfig: refresh_every must be >= 1");
    if (!interaction.is_coulomb()) throw ValidationError("BbgkyConfig: interaction must be a Coulomb kind");
}

namespace {

PotentialKernel kernel_or_zero(const PotentialKernel& K, const WignerGrid& g) {
    if (K.grid().n_x == 0) return PotentialKernel::zero(g);
    if (!(K.grid() == g)) throw ValidationError("BbgkyConfig: external kernel grid differs from the state grid");
    return K;
}

PotentialKernel sum_kernels(const PotentialKernel& a, const PotentialKernel& b) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return b;
    std::vector<double> v(a.values().begin(), a.values().end());
    const auto w = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
    return PotentialKernel(a.grid(), std::move(v));
}

}  // namespace

BbgkyPropagator::BbgkyPropagator(const WignerGrid& grid, const BbgkyConfig& cfg, const SolverConfig1e& sc)
    : grid_(grid), cfg_(cfg), sc_(sc) {
    cfg.validate();
    cfg_.ext1 = kernel_or_zero(cfg.ext1, grid);
    cfg_.ext2 = kernel_or_zero(cfg.ext2, grid);
    table_ = pair_kernel_table(cfg.units, cfg.interaction, grid);
    p1_ = Propagator1e(grid, cfg.fields1, cfg_.ext1, sc, cfg.units);
    p2_ = Propagator1e(grid, cfg.fields2, cfg_.ext2, sc, cfg.units);
}

CoupledState BbgkyPropagator::step(const CoupledState& s) {
    if (!(s.f1.grid() == grid_) || !(s.f2.grid() == grid_))
        throw ValidationError("bbgky_step: state grids differ from the propagator grid");
    if (since_refresh_ < 0 || since_refresh_ >= cfg_.refresh_every) {
        // both kernels from the same snapshot
        const bool strict = cfg_.renormalize;
        const PotentialKernel r1 = reduced_kernel(s.f2, *table_, strict);
        const PotentialKernel r2 = reduced_kernel(s.f1, *table_, strict);
        p1_.set_kernel(sum_kernels(cfg_.ext1, r1));
        p2_.set_kernel(sum_kernels(cfg_.ext2, r2));
        since_refresh_ = 0;
    }
    ++since_refresh_;
    CoupledState out{p1_.step(s.f1), p2_.step(s.f2), s.time + sc_.dt};
    raw_norms_ = {out.f1.integral(), out.f2.integral()};
    if (cfg_.renormalize) {
        out.f1 *= 1.0 / out.f1.integral();
        out.f2 *= 1.0 / out.f2.integral();
    }
    out.f1.set_time(out.time);
    out.f2.set_time(out.time);
    return out;
}

CoupledState bbgky_step(const CoupledState& s, const BbgkyConfig& cfg, const SolverConfig1e& sc) {
    BbgkyPropagator prop(s.f1.grid(), cfg, sc);
    return prop.step(s);
}

namespace {

std::vector<std::string> bbgky_columns() {
    return {"norm2", "mean_x1", "mean_P1", "mean_x2", "mean_P2", "total_P", "raw_drift"};
}

ObservableSeries::Row bbgky_row(const CoupledState& s, double raw_drift) {
    const int d = s.f1.grid().d;
    const auto X = Polynomial::axis(position_axis(d, Arity::one, 1, 0));
    const auto P = Polynomial::axis(momentum_axis(d, Arity::one, 1, 0));
    ObservableSeries::Row row;
    row.t = s.time;
    row.norm = s.f1.integral();
    row.purity1 = purity(s.f1);
    row.purity2 = purity(s.f2);
    // f1 (x) f2 is a product by construction
    row.separability = 0.0;
    const double p1 = moment(s.f1, P), p2 = moment(s.f2, P);
    row.extra = {s.f2.integral(), moment(s.f1, X), p1, moment(s.f2, X), p2, p1 + p2, raw_drift};
    return row;
}

long step_count(double T, double dt) { return T == 0.0 ? 0 : std::max(1L, long(std::ceil(T / dt - 1e-9))); }

}  // namespace

EvolutionBbgky evolve_bbgky(const CoupledState& s0, double T, const BbgkyConfig& cfg, const SolverConfig1e& sc,
                            int output_every, const std::vector<double>& snapshot_times) {
    if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("evolve_bbgky: T must be nonnegative and finite");
    if (output_every < 1) throw ValidationError("evolve_bbgky: output_every must be >= 1");
    sc.validate();
    s0.validate();
    const long steps = step_count(T, sc.dt);
    SolverConfig1e run = sc;
    if (steps > 0) run.dt = T / double(steps);
    BbgkyPropagator prop(s0.f1.grid(), cfg, run);
    std::vector<long> snap_steps;
    for (double ts : snapshot_times) {
        if (ts < 0.0 || ts > T + 1e-12) throw ValidationError("evolve_bbgky: snapshot time outside [0, T]");
        snap_steps.push_back(steps == 0 ? 0 : std::lround(ts / run.dt));
    }
    auto is_snapshot = [&](long k) { return std::find(snap_steps.begin(), snap_steps.end(), k) != snap_steps.end(); };

    EvolutionBbgky ev{s0, ObservableSeries(bbgky_columns()), {}, {}};
    CoupledState s = s0;
    double drift = std::max(std::abs(s.f1.integral() - 1.0), std::abs(s.f2.integral() - 1.0));
    ev.series.add(bbgky_row(s, drift));
    if (is_snapshot(0)) ev.snapshots.push_back(s);
    for (long k = 1; k <= steps; ++k) {
        s = prop.step(s);
        s.time = s0.time + double(k) * run.dt;
        // drift of the raw step, before renormalization
        const auto [n1, n2] = prop.raw_norms();
        drift = std::max({drift, std::abs(n1 - 1.0), std::abs(n2 - 1.0)});
        if (std::abs(n1 - 1.0) > 1e-4 || std::abs(n2 - 1.0) > 1e-4) {
            ev.failure = fmt::format("normalization drift ({:.3e}, {:.3e}) at t = {:.6g}", n1 - 1.0, n2 - 1.0, s.time);
            break;
        }
        const double edge = std::max(edge_mass(s.f1), edge_mass(s.f2));
        if (edge > run.edge_tolerance)
            throw DomainError(fmt::format("evolve_bbgky: edge mass {:.3g} at t = {:.6g} exceeds {:.3g}; enlarge the grid",
                                          edge, s.time, run.edge_tolerance));
        if (k % output_every == 0 || k == steps) ev.series.add(bbgky_row(s, drift));
        if (is_snapshot(k)) ev.snapshots.push_back(s);
    }
    ev.final_state = s;
    return ev;
}

std::vector<double> refresh_convergence(const CoupledState& s0, double T, const BbgkyConfig& cfg,
                                        const SolverConfig1e& sc, const std::vector<int>& cadences) {
    BbgkyConfig c1 = cfg;
    c1.refresh_every = 1;
    const WignerState ref = evolve_bbgky(s0, T, c1, sc, 1 << 30).final_state.f1;
    std::vector<double> out;
    for (int k : cadences) {
        BbgkyConfig ck = cfg;
        ck.refresh_every = k;
        out.push_back(model_distance(evolve_bbgky(s0, T, ck, sc, 1 << 30).final_state.f1, ref, Norm::L2));
    }
    return out;
}

namespace {

double dot(const WignerState& a, const WignerState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm_of(const WignerState& f) { return std::sqrt(dot(f, f)); }

}  // namespace

NonlinearityReport nonlinearity_probe(const CoupledState& s0, double T, double c, const BbgkyConfig& cfg,
                                      const SolverConfig1e& sc) {
    if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("nonlinearity_probe: T must be nonnegative and finite");
    if (!std::isfinite(c) || c == 0.0) throw ValidationError("nonlinearity_probe: c must be finite and nonzero");
    sc.validate();
    BbgkyConfig raw = cfg;
    raw.renormalize = false;
    const long steps = step_count(T, sc.dt);
    SolverConfig1e run = sc;
    if (steps > 0) run.dt = T / double(steps);
    auto evolve = [&](CoupledState s) {
        BbgkyPropagator prop(s.f1.grid(), raw, run);
        for (long k = 0; k < steps; ++k) s = prop.step(s);
        return s;
    };
    CoupledState scaled = s0;
    scaled.f1 *= c;
    const CoupledState a = evolve(s0), b = evolve(scaled);
    WignerState ca = a.f1;
    ca *= c;
    NonlinearityReport r;
    r.c = c;
    // ||A (x) B - C (x) D||^2 = |A|^2 |B|^2 + |C|^2 |D|^2 - 2 <A, C> <B, D>
    const double bb = dot(b.f1, b.f1) * dot(b.f2, b.f2), cc = dot(ca, ca) * dot(a.f2, a.f2);
    const double bc = dot(b.f1, ca) * dot(b.f2, a.f2);
    r.deviation = std::sqrt(std::max(0.0, bb + cc - 2.0 * bc)) / std::sqrt(cc);
    r.factor_deviation = l2_norm_of(b.f1 - ca) / l2_norm_of(ca);
    r.partner_deviation = l2_norm_of(b.f2 - a.f2) / l2_norm_of(a.f2);
    return r;
}

namespace {

void check_micro(const WignerState& f1, const WignerState& f2, int nodes) {
    if (f1.arity() != Arity::one || f2.arity() != Arity::one)
        throw ValidationError("coupled_first_iterate: one-electron states required");
    require_same_grid(f1, f2, "coupled_first_iterate");
    const auto& g = f1.grid();
    if (g.d != 1) throw ValidationError("coupled_first_iterate: d = 1 only");
    if (g.n_x > kCoupledIterateMaxCells || g.n_p > kCoupledIterateMaxCells)
        throw CostGuardError(fmt::format("coupled_first_iterate: micro-grid limited to n_x, n_p <= {}, got {} x {}",
                                         kCoupledIterateMaxCells, g.n_x, g.n_p));
    if (nodes < 1) throw ValidationError("coupled_first_iterate: nodes must be >= 1");
}

WignerState advect(const WignerState& f, double tau, const UnitSystem& units) {
    if (tau == 0.0) return f;
    return Advection1e(f.grid(), FieldConfig{}, tau, Interpolation::spectral, units).apply(f);
}

}  // namespace

CoupledIterate coupled_first_iterate(const WignerState& f1_0, const WignerState& f2_0, double t,
                                     const UnitSystem& units, const PotentialSpec& interaction, int nodes) {
    check_micro(f1_0, f2_0, nodes);
    if (!(t >= 0.0)) throw ValidationError("coupled_first_iterate: t must be >= 0");
    const auto& g = f1_0.grid();
    CoupledIterate out{WignerState::zeros(g, Arity::one, t), WignerState::zeros(g, Arity::one, t),
                       WignerState::zeros(g, Arity::one, t)};
    if (t == 0.0) return out;
    const auto table = pair_kernel_table(units, interaction, g);
    const double w = t / nodes;
    for (int a = 0; a < nodes; ++a) {
        const double ta = (a + 0.5) * w;
        const WignerState f1a = advect(f1_0, ta, units);
        const WignerState f2a = advect(f2_0, ta, units);
        const PotentialKernel v2a = reduced_kernel(f2a, *table, false);
        out.first.axpy(w, advect(apply_kernel(v2a, f1a), t - ta, units));
        // delta f2(ta) from the partner equation, delta f1(ta) from the first one
        WignerState d2 = WignerState::zeros(g, Arity::one, ta), d1 = d2;
        const double wb = ta / nodes;
        for (int b = 0; b < nodes; ++b) {
            const double tb = (b + 0.5) * wb;
            const WignerState f1b = advect(f1_0, tb, units), f2b = advect(f2_0, tb, units);
            d2.axpy(wb, advect(apply_kernel(reduced_kernel(f1b, *table, false), f2b), ta - tb, units));
            d1.axpy(wb, advect(apply_kernel(reduced_kernel(f2b, *table, false), f1b), ta - tb, units));
        }
        out.nested.axpy(w, advect(apply_kernel(reduced_kernel(d2, *table, false), f1a), t - ta, units));
        out.iterated.axpy(w, advect(apply_kernel(v2a, d1), t - ta, units));
    }
    return out;
}

namespace {

// Partner-averaged interaction acting on `self` with the partner state
// `other`, by explicit loops over the full kernel. The electron that is
// acted on is `which` (1 or 2) of the pair kernel.
WignerState averaged_interaction_direct(const InteractionKernel& K, const WignerState& self, const WignerState& other,
                                        int which) {
    const auto& g = self.grid();
    const int nx = g.n_x, np = g.n_p;
    const double dp = g.dp(), dx = g.dx();
    WignerState out = WignerState::zeros(g, Arity::one, self.time());
    for (int i = 0; i < nx; ++i)
        for (int n = 0; n < np; ++n) {
            double s = 0.0;
            for (int n_self = 0; n_self < np; ++n_self)
                for (int m = -(np - 1); m < np; ++m) {
                    // periodic window: transfers congruent to n - n_self
                    if (((m - (n - n_self)) % np + np) % np != 0) continue;
                    for (int m_other = -(np - 1); m_other < np; ++m_other)  // integrated partner momentum
                        for (int j = 0; j < nx; ++j)
                            for (int n_other = 0; n_other < np; ++n_other) {
                                const double v = which == 1 ? K.value(m, m_other, i, j) : K.value(m_other, m, j, i);
                                if (v == 0.0) continue;
                                s += v * other[std::size_t(j) * np + n_other] * self[std::size_t(i) * np + n_self];
                            }
                }
            out[std::size_t(i) * np + n] = s * dp * dx * dp * dp;
        }
    return out;
}

}  // namespace

WignerState coupled_nested_term_direct(const WignerState& f1_0, const WignerState& f2_0, double t,
                                       const UnitSystem& units, const PotentialSpec& interaction, int nodes) {
    check_micro(f1_0, f2_0, nodes);
    const auto& g = f1_0.grid();
    WignerState out = WignerState::zeros(g, Arity::one, t);
    if (t == 0.0) return out;
    const InteractionKernel K = coulomb_kernel_2e(units, interaction, g);
    if (K.is_zero()) return out;
    const double w = t / nodes;
    for (int a = 0; a < nodes; ++a) {
        const double ta = (a + 0.5) * w;
        WignerState d2 = WignerState::zeros(g, Arity::one, ta);
        const double wb = ta / nodes;
        for (int b = 0; b < nodes; ++b) {
            const double tb = (b + 0.5) * wb;
            const WignerState f1b = advect(f1_0, tb, units), f2b = advect(f2_0, tb, units);
            d2.axpy(wb, advect(averaged_interaction_direct(K, f2b, f1b, 2), ta - tb, units));
        }
        const WignerState f1a = advect(f1_0, ta, units);
        out.axpy(w, advect(averaged_interaction_direct(K, f1a, d2, 1), t - ta, units));
    }
    return out;
}

}  // namespace wigner2e
