#include "wigner2e/single_electron.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <fmt/format.h>
#include <limits>

#include "wigner2e/parallel.hpp"

namespace wigner2e {

const char* to_string(Splitting s) { return s == Splitting::strang ? "strang" : "lie"; }

Splitting splitting_from_string(const std::string& s) {
    if (s == "strang") return Splitting::strang;
    if (s == "lie") return Splitting::lie;
    throw ValidationError("splitting must be strang or lie, got '" + s + "'");
}

void SolverConfig1e::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("solver: dt must be > 0");
    if (neumann_order < 0) throw ValidationError("solver: neumann_order must be >= 0");
    if (neumann_order > 3) throw CostGuardError("solver: neumann_order is limited to 3");
    if (neumann_nodes < 16) throw ValidationError("solver: neumann_nodes must be >= 16");
    if (!(b1_guard >= 0.15)) throw ValidationError("solver: b1_guard below the RK4 stability limit 0.15");
    if (!(edge_tolerance > 0.0)) throw ValidationError("solver: edge_tolerance must be > 0");
}

std::vector<double> circulant_exponential(const std::vector<double>& c, int N, int d, double h) {
    using cd = std::complex<double>;
    std::vector<cd> w(N);
    for (int k = 0; k < N; ++k) w[k] = std::polar(1.0, -2.0 * kPi * k / N);
    auto dft = [&](std::vector<cd>& v, std::size_t off, std::size_t stride, bool inverse) {
        std::vector<cd> t(N);
        for (int k = 0; k < N; ++k) {
            cd s = 0.0;
            for (int j = 0; j < N; ++j) {
                const cd e = w[(std::size_t(j) * k) % N];
                s += v[off + j * stride] * (inverse ? std::conj(e) : e);
            }
            t[k] = s;
        }
        for (int k = 0; k < N; ++k) v[off + k * stride] = inverse ? t[k] / double(N) : t[k];
    };
    const std::size_t size = d == 1 ? N : std::size_t(N) * N;
    std::vector<cd> v(c.begin(), c.end());
    if (d == 1) {
        dft(v, 0, 1, false);
    } else {
        for (int a = 0; a < N; ++a) dft(v, std::size_t(a) * N, 1, false);
        for (int b = 0; b < N; ++b) dft(v, b, N, false);
    }
    // the generator is antisymmetric, so its eigenvalues are imaginary
    for (std::size_t k = 0; k < size; ++k) v[k] = std::exp(cd(0.0, h * v[k].imag()));
    if (d == 1) {
        dft(v, 0, 1, true);
    } else {
        for (int a = 0; a < N; ++a) dft(v, std::size_t(a) * N, 1, true);
        for (int b = 0; b < N; ++b) dft(v, b, N, true);
    }
    std::vector<double> out(size);
    for (std::size_t k = 0; k < size; ++k) out[k] = v[k].real();
    return out;
}

namespace {

double wrapped_flux(const PotentialKernel& K, const WignerState& f) {
    if (K.is_zero()) return 0.0;
    const WignerGrid& g = f.grid();
    const std::size_t R = g.position_cells(), Q = g.momentum_cells();
    const double* v = f.data();
    return ordered_sum(R * Q, [&](std::size_t i) { return K.wrapped_weight(i / Q, i % Q) * std::abs(v[i]); }) *
           f.cell_volume();
}

}  // namespace

KernelPropagator::KernelPropagator(const PotentialKernel& K, double h) : grid_(K.grid()) {
    identity_ = K.is_zero() || h == 0.0;
    if (identity_) return;
    const int np = grid_.n_p, d = grid_.d;
    const std::size_t R = grid_.position_cells();
    width_ = grid_.momentum_cells();
    rows_.resize(R * width_);
    const double dpd = std::pow(grid_.dp(), d);
    parallel_for(R, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            auto c = K.periodic_row(r);
            for (double& x : c) x *= dpd;
            const auto ex = circulant_exponential(c, np, d, h);
            std::copy(ex.begin(), ex.end(), rows_.begin() + r * width_);
        }
    });
    if (d == 1) {
        dense_.resize(R);
        for (std::size_t r = 0; r < R; ++r) dense_[r] = matrix(r);
    }
}

std::vector<double> KernelPropagator::matrix(std::size_t r) const {
    if (grid_.d != 1) throw ValidationError("KernelPropagator::matrix: d = 1 only");
    const int np = grid_.n_p;
    std::vector<double> M(std::size_t(np) * np, 0.0);
    if (identity_) {
        for (int n = 0; n < np; ++n) M[std::size_t(n) * np + n] = 1.0;
        return M;
    }
    const auto e = row(r);
    for (int n = 0; n < np; ++n)
        for (int m = 0; m < np; ++m) M[std::size_t(n) * np + m] = e[((n - m) % np + np) % np];
    return M;
}

void KernelPropagator::apply(const WignerState& in, WignerState& out) const {
    if (in.arity() != Arity::one || !(in.grid() == grid_))
        throw ValidationError("KernelPropagator: state does not match the kernel grid");
    if (identity_) {
        out = in;
        return;
    }
    if (!(out.grid() == grid_) || out.arity() != Arity::one || out.data() == in.data())
        out = WignerState::zeros(grid_, Arity::one, in.time());
    out.set_time(in.time());
    const int np = grid_.n_p, d = grid_.d;
    const std::size_t R = grid_.position_cells(), Q = width_;
    parallel_for(R, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            const double* src = in.data() + r * Q;
            const double* ker = rows_.data() + r * Q;
            double* dst = out.data() + r * Q;
            if (d == 1) {
                for (int n = 0; n < np; ++n) {
                    double s = 0.0;
                    for (int j = 0; j <= n; ++j) s += ker[j] * src[n - j];
                    for (int j = n + 1; j < np; ++j) s += ker[j] * src[n - j + np];
                    dst[n] = s;
                }
            } else {
                for (int nx = 0; nx < np; ++nx)
                    for (int ny = 0; ny < np; ++ny) {
                        double s = 0.0;
                        for (int jx = 0; jx < np; ++jx) {
                            const double* kr = ker + std::size_t(jx) * np;
                            const double* sr = src + std::size_t((nx - jx + np) % np) * np;
                            for (int jy = 0; jy < np; ++jy) s += kr[jy] * sr[(ny - jy + np) % np];
                        }
                        dst[std::size_t(nx) * np + ny] = s;
                    }
            }
        }
    });
}

void KernelPropagator::apply_to_electron(const WignerState& in, WignerState& out, int electron) const {
    if (in.arity() != Arity::two || !(in.grid() == grid_) || grid_.d != 1)
        throw ValidationError("KernelPropagator: needs a d = 1 pair state on the kernel grid");
    if (electron != 1 && electron != 2) throw ValidationError("KernelPropagator: electron must be 1 or 2");
    if (identity_) {
        out = in;
        return;
    }
    if (!(out.grid() == grid_) || out.arity() != Arity::two || out.data() == in.data())
        out = WignerState::zeros(grid_, Arity::two, in.time());
    out.set_time(in.time());
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const int R = grid_.n_x, Q = grid_.n_p;
    parallel_for(std::size_t(R) * R, [&](std::size_t b, std::size_t e) {
        for (std::size_t rr = b; rr < e; ++rr) {
            Eigen::Map<const RowMat> X(in.data() + rr * Q * Q, Q, Q);
            Eigen::Map<RowMat> Y(out.data() + rr * Q * Q, Q, Q);
            if (electron == 1) {
                Eigen::Map<const RowMat> E(dense_[rr / R].data(), Q, Q);
                Y.noalias() = E * X;
            } else {
                Eigen::Map<const RowMat> E(dense_[rr % R].data(), Q, Q);
                Y.noalias() = X * E.transpose();
            }
        }
    });
}

WignerState apply_b1_term(const WignerState& f, double B1, const UnitSystem& units) {
    if (f.arity() != Arity::one) throw ValidationError("apply_b1_term: one-electron state required");
    const WignerGrid& g = f.grid();
    WignerState out = WignerState::zeros(g, Arity::one, f.time());
    if (B1 == 0.0 || g.d == 1) return out;
    const int n = g.n_x, q = g.n_p;
    const double kappa = B1 * units.hbar * units.hbar * units.charge / (12.0 * units.mass);
    const double dx = g.dx(), dp = g.dp();
    auto at = [&](int ix, int iy, int px, int py) {
        ix = (ix + n) % n;
        iy = (iy + n) % n;
        px = (px + q) % q;
        py = (py + q) % q;
        return f[((std::size_t(ix) * n + iy) * q + px) * q + py];
    };
    // d2/dPy2 at fixed (x, Px), then the central x difference of it
    auto dpp_y = [&](int ix, int iy, int px, int py) {
        return (at(ix, iy, px, py + 1) - 2.0 * at(ix, iy, px, py) + at(ix, iy, px, py - 1)) / (dp * dp);
    };
    auto dpxpy = [&](int ix, int iy, int px, int py) {
        return (at(ix, iy, px + 1, py + 1) - at(ix, iy, px + 1, py - 1) - at(ix, iy, px - 1, py + 1) +
                at(ix, iy, px - 1, py - 1)) /
               (4.0 * dp * dp);
    };
    parallel_for(std::size_t(n) * n, [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) {
            const int ix = int(c / n), iy = int(c % n);
            for (int px = 0; px < q; ++px)
                for (int py = 0; py < q; ++py) {
                    const double t1 = (dpp_y(ix + 1, iy, px, py) - dpp_y(ix - 1, iy, px, py)) / (2.0 * dx);
                    const double t2 = (dpxpy(ix, iy + 1, px, py) - dpxpy(ix, iy - 1, px, py)) / (2.0 * dx);
                    out[((c * q) + px) * q + py] = kappa * (t1 - t2);
                }
        }
    });
    return out;
}

double b1_step_limit(const WignerGrid& grid, double B1, double guard_constant, const UnitSystem& units) {
    if (B1 == 0.0 || grid.d == 1) return std::numeric_limits<double>::infinity();
    return grid.dx() * grid.dp() * grid.dp() * units.mass /
           (units.charge * std::abs(B1) * units.hbar * units.hbar * guard_constant);
}

Propagator1e::Propagator1e(const WignerGrid& grid, const FieldConfig& fields, const PotentialKernel& K,
                           const SolverConfig1e& sc, const UnitSystem& units)
    : grid_(grid), fields_(fields), units_(units), sc_(sc) {
    sc.validate();
    fields.validate(grid.d);
    if (!(K.grid() == grid)) throw ValidationError("Propagator1e: kernel grid differs from the state grid");
    const double limit = b1_step_limit(grid, fields.B1, sc.b1_guard, units);
    if (sc.dt > limit)
        throw NumericalGuardError(
            fmt::format("B1 term: dt = {:.6g} exceeds the stability guard {:.6g} (C = {})", sc.dt, limit, sc.b1_guard));
    if (sc.splitting == Splitting::strang)
        half_ = Advection1e(grid, fields, 0.5 * sc.dt, sc.interpolation, units);
    else
        full_ = Advection1e(grid, fields, sc.dt, sc.interpolation, units);
    set_kernel(K);
}

void Propagator1e::set_kernel(const PotentialKernel& K) {
    if (!(K.grid() == grid_)) throw ValidationError("Propagator1e: kernel grid differs from the state grid");
    K_ = K;
    const bool b1 = fields_.B1 != 0.0 && grid_.d == 2;
    if (sc_.splitting == Splitting::strang && b1) {
        khalf_ = KernelPropagator(K, 0.5 * sc_.dt);
        kfull_ = KernelPropagator();
    } else {
        kfull_ = KernelPropagator(K, sc_.dt);
        khalf_ = KernelPropagator();
    }
}

void Propagator1e::b1_step(WignerState& f) const {
    const double h = sc_.dt;
    const auto k1 = apply_b1_term(f, fields_.B1, units_);
    const auto k2 = apply_b1_term(f + (0.5 * h) * k1, fields_.B1, units_);
    const auto k3 = apply_b1_term(f + (0.5 * h) * k2, fields_.B1, units_);
    const auto k4 = apply_b1_term(f + h * k3, fields_.B1, units_);
    f.axpy(h / 6.0, k1);
    f.axpy(h / 3.0, k2);
    f.axpy(h / 3.0, k3);
    f.axpy(h / 6.0, k4);
}

WignerState Propagator1e::step(const WignerState& f, StepReport1e* report) const {
    if (!(f.grid() == grid_) || f.arity() != Arity::one)
        throw ValidationError("step_1e: state does not match the propagator grid");
    const bool b1 = fields_.B1 != 0.0 && grid_.d == 2;
    WignerState a, b;
    if (sc_.splitting == Splitting::strang) {
        half_.apply(f, a);
        if (b1) {
            khalf_.apply(a, b);
            b1_step(b);
            khalf_.apply(b, a);
        } else {
            kfull_.apply(a, b);
            std::swap(a, b);
        }
        half_.apply(a, b);
    } else {
        full_.apply(f, a);
        kfull_.apply(a, b);
        if (b1) b1_step(b);
    }
    b.set_time(f.time() + sc_.dt);
    if (report) {
        report->wrapped = sc_.dt * wrapped_flux(K_, f);
        report->edge_mass = edge_mass(b);
    }
    return b;
}

WignerState step_1e(const WignerState& f, const FieldConfig& cfg, const PotentialKernel& K, const SolverConfig1e& sc,
                    const UnitSystem& units, StepReport1e* report) {
    return Propagator1e(f.grid(), cfg, K, sc, units).step(f, report);
}

namespace {

std::vector<std::string> evolve_columns(int d) {
    if (d == 1) return {"mean_x", "mean_Px", "mean_P2", "wrapped", "edge_mass"};
    return {"mean_x", "mean_Px", "mean_y", "mean_Py", "mean_P2", "wrapped", "edge_mass"};
}

ObservableSeries::Row evolve_row(const WignerState& f, double wrapped, double edge) {
    const int d = f.grid().d;
    ObservableSeries::Row row;
    row.t = f.time();
    row.norm = f.integral();
    row.purity1 = std::abs(row.norm - 1.0) <= 1e-4 ? purity(f) : std::nan("");
    row.purity2 = std::nan("");
    row.separability = std::nan("");
    Polynomial p2;
    for (int a = 0; a < d; ++a) {
        const auto x = Polynomial::axis(position_axis(d, Arity::one, 1, a));
        const auto P = Polynomial::axis(momentum_axis(d, Arity::one, 1, a));
        row.extra.push_back(moment(f, x));
        row.extra.push_back(moment(f, P));
        p2 = p2 + P * P;
    }
    row.extra.push_back(moment(f, p2));
    row.extra.push_back(wrapped);
    row.extra.push_back(edge);
    return row;
}

}  // namespace

Evolution1e evolve_1e(const WignerState& f0, double T, const FieldConfig& cfg, const PotentialKernel& K,
                      const SolverConfig1e& sc, int output_every, const std::vector<double>& snapshot_times,
                      const UnitSystem& units) {
    if (!(T >= 0.0)) throw ValidationError("evolve_1e: horizon must be >= 0");
    if (output_every < 1) throw ValidationError("evolve_1e: output_every must be >= 1");
    sc.validate();
    const int steps = T == 0.0 ? 0 : std::max(1, int(std::ceil(T / sc.dt - 1e-9)));
    SolverConfig1e run = sc;
    if (steps > 0) run.dt = T / steps;
    Propagator1e prop(f0.grid(), cfg, K, run, units);
    std::vector<int> snap_steps;
    for (double ts : snapshot_times) snap_steps.push_back(int(std::lround(ts / (steps ? run.dt : 1.0))));

    Evolution1e ev;
    ev.series = ObservableSeries(evolve_columns(f0.grid().d));
    WignerState f = f0;
    ev.series.add(evolve_row(f, 0.0, edge_mass(f)));
    for (int s : snap_steps)
        if (s == 0) ev.snapshots.push_back(f);
    double wrapped = 0.0;
    for (int k = 1; k <= steps; ++k) {
        StepReport1e rep;
        f = prop.step(f, &rep);
        f.set_time(k * run.dt);
        wrapped += rep.wrapped;
        if (std::abs(f.integral() - 1.0) > 1e-4) {
            ev.failure = fmt::format("normalization drift {:.3e} at t = {:.6g}", f.integral() - 1.0, f.time());
            ev.series.add(evolve_row(f, wrapped, rep.edge_mass));
            break;
        }
        if (rep.edge_mass > sc.edge_tolerance)
            throw DomainError(fmt::format("evolve_1e: edge mass {:.3g} at t = {:.6g} exceeds {:.3g}; enlarge the grid",
                                          rep.edge_mass, f.time(), sc.edge_tolerance));
        if (k % output_every == 0 || k == steps) {
            ev.series.add(evolve_row(f, wrapped, rep.edge_mass));
            wrapped = 0.0;
        }
        for (int s : snap_steps)
            if (s == k) ev.snapshots.push_back(f);
    }
    ev.final_state = std::move(f);
    return ev;
}

double neumann_work(std::size_t cells, int order, int nodes) {
    double n = 1.0;
    for (int k = 1; k <= order; ++k) n = 1.0 + nodes * (n + 1.0);
    return n * double(cells);
}

namespace {

struct NeumannContext {
    const WignerState& f0;
    const FieldConfig& cfg;
    const PotentialKernel& K;
    const SolverConfig1e& sc;
    const UnitSystem& units;

    WignerState advect(const WignerState& f, double tau) const {
        if (tau == 0.0) return f;
        return Advection1e(f.grid(), cfg, tau, sc.interpolation, units).apply(f);
    }
    WignerState action(const WignerState& f) const {
        WignerState g = apply_kernel(K, f);
        if (cfg.B1 != 0.0 && f.grid().d == 2) g += apply_b1_term(f, cfg.B1, units);
        return g;
    }
    WignerState term(int k, double t) const {
        WignerState out = advect(f0, t);
        if (k == 0 || t == 0.0) return out;
        const int M = sc.neumann_nodes;
        const double w = t / M;
        for (int a = 0; a < M; ++a) {
            const double ta = (a + 0.5) * w;
            out.axpy(w, advect(action(term(k - 1, ta)), t - ta));
        }
        return out;
    }
};

}  // namespace

WignerState neumann_solve_1e(const WignerState& f0, double t, int order, const FieldConfig& cfg,
                             const PotentialKernel& K, const SolverConfig1e& sc, const UnitSystem& units) {
    if (order < 0) throw ValidationError("neumann_solve_1e: order must be >= 0");
    if (order > 3) throw CostGuardError("neumann_solve_1e: order > 3 refused; use the grid solver");
    if (!(t >= 0.0)) throw ValidationError("neumann_solve_1e: t must be >= 0");
    if (f0.arity() != Arity::one) throw ValidationError("neumann_solve_1e: one-electron state required");
    if (!(K.grid() == f0.grid())) throw ValidationError("neumann_solve_1e: kernel grid differs from the state grid");
    cfg.validate(f0.grid().d);
    if (sc.neumann_nodes < 16) throw ValidationError("neumann_solve_1e: at least 16 midpoint nodes per level");
    const double work = neumann_work(f0.size(), order, sc.neumann_nodes);
    if (work > 5e8)
        throw CostGuardError(fmt::format(
            "neumann_solve_1e: {:.3g} cell updates exceed the guard 5e8; use n_x*n_p <= 4096 per axis pair "
            "or a lower order",
            work));
    NeumannContext ctx{f0, cfg, K, sc, units};
    WignerState out = ctx.term(order, t);
    out.set_time(f0.time() + t);
    return out;
}

}  // namespace wigner2e
