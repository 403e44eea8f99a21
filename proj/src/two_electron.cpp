#include "wigner2e/two_electron.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <string>

#include "wigner2e/errors.hpp"
#include "wigner2e/parallel.hpp"

namespace wigner2e {

std::size_t default_max_cells() {
    constexpr std::size_t fallback = 16'777'216;
    const char* env = std::getenv("WIGNER2E_MAX_CELLS");
    if (!env || !*env) return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(env, &pos);
        if (pos != std::string(env).size() || v == 0) throw std::invalid_argument(env);
        return std::size_t(v);
    } catch (const std::exception&) {
        throw ValidationError(fmt::format("WIGNER2E_MAX_CELLS must be a positive integer, got '{}'", env));
    }
}

void SolverConfig2e::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("SolverConfig2e: dt must be positive and finite");
    if (max_cells == 0) throw ValidationError("SolverConfig2e: max_cells must be positive");
    if (!(edge_tolerance > 0.0)) throw ValidationError("SolverConfig2e: edge_tolerance must be positive");
}

void check_cost_2e(const WignerGrid& grid, const SolverConfig2e& sc) {
    if (grid.d != 1) throw ValidationError("two-electron grid solver is limited to d = 1");
    const double cells = double(grid.n_x) * grid.n_x * grid.n_p * grid.n_p;
    if (cells > double(sc.max_cells))
        throw CostGuardError(fmt::format("two-electron grid has {:.0f} cells, above the cap of {} (n_x^2 n_p^2)", cells,
                                         sc.max_cells));
}

InteractionPropagator::InteractionPropagator(const InteractionKernel& K, double h) {
    identity_ = K.is_zero() || h == 0.0;
    if (identity_) return;
    grid_ = K.grid();
    const int R = grid_.n_x, Q = grid_.n_p;
    const double dp = grid_.dp();
    const int lines = 2 * Q - 1;
    lines_.assign(2 * R - 1, std::vector<std::vector<double>>(lines));
    parallel_for(std::size_t(2 * R - 1), [&](std::size_t b, std::size_t e) {
        std::vector<double> kl;
        for (std::size_t disp = b; disp < e; ++disp) {
            const auto row = K.table().row(disp);
            for (int c = 0; c < lines; ++c) {
                const int l = momentum_line(Q, c).length;
                fold_onto_line(row, Q, l, kl);
                for (double& x : kl) x *= dp;
                const auto ex = circulant_exponential(kl, l, 1, h);
                auto& M = lines_[disp][c];
                M.resize(std::size_t(l) * l);
                for (int u = 0; u < l; ++u)
                    for (int t = 0; t < l; ++t) M[std::size_t(u) * l + t] = ex[((t - u) % l + l) % l];
            }
        }
    });
}

void InteractionPropagator::apply(const WignerState& in, WignerState& out) const {
    if (identity_) {
        out = in;
        return;
    }
    if (in.arity() != Arity::two || !(in.grid() == grid_))
        throw ValidationError("InteractionPropagator: state does not match the kernel grid");
    if (!(out.grid() == grid_) || out.arity() != Arity::two || out.data() == in.data())
        out = WignerState::zeros(grid_, Arity::two, in.time());
    out.set_time(in.time());
    const int R = grid_.n_x, Q = grid_.n_p;
    const std::size_t block = std::size_t(Q) * Q;
    const double* src = in.data();
    double* dst = out.data();
    // all pairs with r1 - r2 = disp - (R - 1) share the line matrices
    parallel_for(std::size_t(2 * R - 1), [&](std::size_t b, std::size_t e) {
        Eigen::MatrixXd X, Y;
        std::vector<std::size_t> pairs;
        for (std::size_t disp = b; disp < e; ++disp) {
            const int delta = int(disp) - (R - 1);
            pairs.clear();
            for (int r2 = std::max(0, -delta); r2 < std::min(R, R - delta); ++r2)
                pairs.push_back((std::size_t(r2 + delta) * R + r2) * block);
            const int np_ = int(pairs.size());
            for (int c = 0; c <= 2 * (Q - 1); ++c) {
                const auto line = momentum_line(Q, c);
                const int l = line.length;
                X.resize(l, np_);
                for (int k = 0; k < np_; ++k)
                    for (int u = 0; u < l; ++u) {
                        const int n1 = line.first + u;
                        X(u, k) = src[pairs[k] + std::size_t(n1) * Q + (c - n1)];
                    }
                Eigen::Map<const Eigen::MatrixXd> M(lines_[disp][c].data(), l, l);
                Y.noalias() = M * X;
                for (int k = 0; k < np_; ++k)
                    for (int t = 0; t < l; ++t) {
                        const int n1 = line.first + t;
                        dst[pairs[k] + std::size_t(n1) * Q + (c - n1)] = Y(t, k);
                    }
            }
        }
    });
}

Propagator2e::Propagator2e(const WignerGrid& grid, const Kernels2e& kernels, const SolverConfig2e& sc,
                           const UnitSystem& units)
    : grid_(grid), sc_(sc), K_(kernels) {
    sc.validate();
    grid.validate();
    check_cost_2e(grid, sc);
    auto check = [&](const PotentialKernel& K, const char* what) {
        if (!K.is_zero() && !(K.grid() == grid))
            throw ValidationError(fmt::format("Propagator2e: {} kernel grid does not match the state grid", what));
    };
    if (K_.ext1.grid().n_x == 0) K_.ext1 = PotentialKernel::zero(grid);
    if (K_.ext2.grid().n_x == 0) K_.ext2 = PotentialKernel::zero(grid);
    check(K_.ext1, "external (electron 1)");
    check(K_.ext2, "external (electron 2)");
    if (!K_.interaction.is_zero() && !(K_.interaction.grid() == grid))
        throw ValidationError("Propagator2e: interaction kernel grid does not match the state grid");
    half_ = Advection2e(grid, 0.5 * sc.dt, sc.interpolation, units);
    full_ = Advection2e(grid, sc.dt, sc.interpolation, units);
    e1_ = KernelPropagator(K_.ext1, 0.5 * sc.dt);
    e2_ = KernelPropagator(K_.ext2, 0.5 * sc.dt);
    int_ = InteractionPropagator(K_.interaction, sc.dt);
}

void Propagator2e::collision_part(WignerState& f) const {
    auto ext = [&](WignerState& g) {
        if (!e1_.is_identity()) {
            e1_.apply_to_electron(g, tmp_, 1);
            std::swap(g, tmp_);
        }
        if (!e2_.is_identity()) {
            e2_.apply_to_electron(g, tmp_, 2);
            std::swap(g, tmp_);
        }
    };
    const double t = f.time();
    ext(f);
    if (!int_.is_identity()) {
        int_.apply(f, tmp_);
        std::swap(f, tmp_);
    }
    ext(f);
    f.set_time(t);
}

namespace {

double wrapped_flux_2e(const Kernels2e& K, const WignerState& f) {
    const WignerGrid& g = f.grid();
    const int R = g.n_x, Q = g.n_p;
    const std::size_t block = std::size_t(Q) * Q;
    const bool e1 = !K.ext1.is_zero(), e2 = !K.ext2.is_zero(), in = !K.interaction.is_zero();
    if (!e1 && !e2 && !in) return 0.0;
    const double s = ordered_sum(std::size_t(R) * R, [&](std::size_t rr) {
        const std::size_t r1 = rr / R, r2 = rr % R, disp = r1 + R - 1 - r2;
        double w = 0.0;
        for (int n1 = 0; n1 < Q; ++n1)
            for (int n2 = 0; n2 < Q; ++n2) {
                double k = 0.0;
                if (e1) k += K.ext1.wrapped_weight(r1, n1);
                if (e2) k += K.ext2.wrapped_weight(r2, n2);
                if (in) k += K.interaction.wrapped_weight(disp, n1, n2);
                w += k * std::abs(f[rr * block + std::size_t(n1) * Q + n2]);
            }
        return w;
    });
    return s * f.cell_volume();
}

}  // namespace

WignerState Propagator2e::step(const WignerState& f, StepReport2e* report) const {
    if (f.arity() != Arity::two || !(f.grid() == grid_))
        throw ValidationError("step_2e: state must be a two-electron state on the propagator grid");
    WignerState g;
    half_.apply(f, g);
    collision_part(g);
    WignerState out;
    half_.apply(g, out);
    out.set_time(f.time() + sc_.dt);
    if (report) {
        report->wrapped = wrapped_flux_2e(K_, f) * sc_.dt;
        report->edge_mass = edge_mass(out);
    }
    return out;
}

WignerState step_2e(const WignerState& f, const PotentialKernel& K_ext1, const PotentialKernel& K_ext2,
                    const InteractionKernel& K_int, const SolverConfig2e& sc, StepReport2e* report) {
    return Propagator2e(f.grid(), Kernels2e{K_ext1, K_ext2, K_int}, sc).step(f, report);
}

WignerState first_order_increment(const WignerState& f1_0, const WignerState& f2_0, double dt,
                                  const PotentialKernel& K_ext1, const PotentialKernel& K_ext2,
                                  const InteractionKernel& K_int, Interpolation method) {
    if (f1_0.arity() != Arity::one || f2_0.arity() != Arity::one)
        throw ValidationError("first_order_increment: factors must be one-electron states");
    require_same_grid(f1_0, f2_0, "first_order_increment");
    if (f1_0.grid().d != 1) throw ValidationError("first_order_increment: d = 1 only");
    if (!(dt >= 0.0)) throw ValidationError("first_order_increment: dt must be nonnegative");
    const WignerState prod = tensor_product(f1_0, f2_0);
    WignerState g = prod;
    if (dt > 0.0) {
        if (!K_ext1.is_zero()) g.axpy(dt, apply_kernel_to_electron(K_ext1, prod, 1));
        if (!K_ext2.is_zero()) g.axpy(dt, apply_kernel_to_electron(K_ext2, prod, 2));
        if (!K_int.is_zero()) g.axpy(dt, apply_kernel(K_int, prod));
    }
    if (dt == 0.0) return g;
    WignerState out;
    Advection2e(prod.grid(), dt, method).apply(g, out);
    out.set_time(f1_0.time() + dt);
    return out;
}

std::vector<std::string> pair_observable_columns() {
    return {"mean_x1", "mean_P1", "mean_x2", "mean_P2", "total_P", "wrapped", "edge_mass"};
}

ObservableSeries::Row pair_observables(const WignerState& f, double wrapped, double edge) {
    const WignerState m1 = marginal(f, 1), m2 = marginal(f, 2);
    const Polynomial X = Polynomial::axis(0), P = Polynomial::axis(1);
    ObservableSeries::Row row;
    row.t = f.time();
    row.norm = f.integral();
    row.purity1 = purity(m1);
    row.purity2 = purity(m2);
    row.separability = separability_metric(f);
    const double p1 = moment(m1, P), p2 = moment(m2, P);
    row.extra = {moment(m1, X), p1, moment(m2, X), p2, p1 + p2, wrapped, edge};
    return row;
}

Evolution2e evolve_2e(const WignerState& f0, double T, const Kernels2e& kernels, const SolverConfig2e& sc,
                      int output_every, const std::vector<double>& snapshot_times,
                      const std::function<void(const WignerState&)>& on_record) {
    if (f0.arity() != Arity::two) throw ValidationError("evolve_2e: initial state must be a two-electron state");
    if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("evolve_2e: T must be nonnegative and finite");
    if (output_every < 1) throw ValidationError("evolve_2e: output_every must be >= 1");
    sc.validate();
    const long steps = T == 0.0 ? 0 : long(std::ceil(T / sc.dt - 1e-9));
    SolverConfig2e run = sc;
    if (steps > 0) run.dt = T / double(steps);
    const Propagator2e prop(f0.grid(), kernels, run);

    std::vector<long> snap_steps;
    for (double ts : snapshot_times) {
        if (ts < 0.0 || ts > T + 1e-12) throw ValidationError("evolve_2e: snapshot time outside [0, T]");
        snap_steps.push_back(steps == 0 ? 0 : std::lround(ts / run.dt));
    }
    auto is_snapshot = [&](long k) { return std::find(snap_steps.begin(), snap_steps.end(), k) != snap_steps.end(); };

    Evolution2e ev{f0, ObservableSeries(pair_observable_columns()), {}, {}};
    const double t0 = f0.time();
    auto record = [&](const WignerState& f, double wrapped) -> bool {
        const double edge = edge_mass(f);
        if (std::abs(f.integral() - 1.0) > 1e-4) {
            ev.failure = fmt::format("normalization drift {:.3e} at t = {:.6g}", f.integral() - 1.0, f.time());
            return false;
        }
        ev.series.add(pair_observables(f, wrapped, edge));
        if (edge > run.edge_tolerance)
            throw DomainError(fmt::format("evolve_2e: edge mass {:.3e} above tolerance {:.3e} at t = {:.6g}", edge,
                                          run.edge_tolerance, f.time()));
        if (on_record) on_record(f);
        return true;
    };
    if (!record(f0, 0.0)) return ev;
    if (is_snapshot(0)) ev.snapshots.push_back(f0);

    // For spectral shifts A(dt/2) A(dt/2) = A(dt), so consecutive half
    // advections are merged between recorded steps.
    const bool fuse = run.interpolation == Interpolation::spectral;
    WignerState f = f0, g, tmp;
    bool open = false;
    for (long k = 1; k <= steps; ++k) {
        const bool rec = k == steps || k % output_every == 0;
        const bool snap = is_snapshot(k);
        if (!open) {
            prop.half_advection(f, g);
        } else {
            prop.full_advection(g, tmp);
            std::swap(g, tmp);
        }
        prop.collision_part(g);
        const double t = t0 + double(k) * run.dt;
        if (fuse && !rec && !snap) {
            open = true;
            continue;
        }
        prop.half_advection(g, f);
        f.set_time(t);
        open = false;
        if (rec && !record(f, wrapped_flux_2e(prop.kernels(), f) * run.dt)) {
            ev.final_state = f;
            return ev;
        }
        if (snap) ev.snapshots.push_back(f);
    }
    ev.final_state = f;
    return ev;
}

}  // namespace wigner2e
