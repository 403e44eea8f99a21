#pragma once

#include <string>
#include <vector>

#include "wigner2e/advection.hpp"
#include "wigner2e/diagnostics.hpp"
#include "wigner2e/potentials.hpp"
#include "wigner2e/trajectories.hpp"

namespace wigner2e {

enum class Splitting { strang, lie };
const char* to_string(Splitting s);
Splitting splitting_from_string(const std::string& s);

struct SolverConfig1e {
    double dt = 1e-3;
    Splitting splitting = Splitting::strang;
    Interpolation interpolation = Interpolation::spectral;
    int neumann_order = 0;
    // Midpoint nodes per nested time integral of the Neumann solver.
    int neumann_nodes = 16;
    // C in the B1 guard dt <= dx dp^2 m / (e |B1| hbar^2 C). The explicit
    // RK4 update of the B1 term is stable for C >= 0.15.
    double b1_guard = 0.25;
    // Largest tolerated probability in the two outermost position cells.
    double edge_tolerance = 1e-4;

    void validate() const;
};

// First column of exp(h C) for the antisymmetric circulant C with first
// column c on n (d = 1) or n x n (d = 2) periodic indices, by a discrete
// Fourier transform.
std::vector<double> circulant_exponential(const std::vector<double>& c, int n, int d, double h);

// exp(h G) of the kernel generator G f = apply_kernel(K, f). On the periodic
// momentum window G is circulant per position cell, so the exponential is
// computed exactly by a discrete Fourier transform and stored as one
// convolution row per cell. G is antisymmetric, so the propagator is
// orthogonal and preserves the cell sums.
class KernelPropagator {
public:
    KernelPropagator() = default;
    KernelPropagator(const PotentialKernel& K, double h);

    bool is_identity() const { return identity_; }
    const WignerGrid& grid() const { return grid_; }
    // Row e_r with (exp(h G) f)(r, n) = sum_j e_r[j] f(r, n - j mod n_p).
    std::span<const double> row(std::size_t r) const { return {rows_.data() + r * width_, width_}; }
    void apply(const WignerState& in, WignerState& out) const;
    // Acts on the momentum axis of electron 1 or 2 of a d = 1 pair state.
    void apply_to_electron(const WignerState& in, WignerState& out, int electron) const;
    // Dense n_p x n_p matrix of cell r, row-major (d = 1 only).
    std::vector<double> matrix(std::size_t r) const;

private:
    WignerGrid grid_;
    std::size_t width_ = 0;
    std::vector<double> rows_;
    std::vector<std::vector<double>> dense_;
    bool identity_ = true;
};

// The B1 operator (B1 hbar^2 e / (12 m)) (d^3/dPy^2 dx - d^3/dPx dPy dy) f with
// periodic central differences on every axis. Zero for d = 1.
WignerState apply_b1_term(const WignerState& f, double B1, const UnitSystem& units = {});
// Upper bound on dt imposed by the B1 guard (infinity when B1 = 0).
double b1_step_limit(const WignerGrid& grid, double B1, double guard_constant, const UnitSystem& units = {});

struct StepReport1e {
    // Integral of |flow| re-entered through the momentum-window wrap.
    double wrapped = 0.0;
    double edge_mass = 0.0;
};

// Precomputed split-step propagator for a fixed (fields, kernel, dt).
// strang: A(dt/2) K(dt) A(dt/2), or A(dt/2) K(dt/2) B(dt) K(dt/2) A(dt/2)
// with a B1 term; lie: A(dt) K(dt) [B(dt)]. A is the advection, K the exact
// kernel exponential and B an RK4 step of the B1 term.
class Propagator1e {
public:
    Propagator1e() = default;
    Propagator1e(const WignerGrid& grid, const FieldConfig& fields, const PotentialKernel& K,
                 const SolverConfig1e& sc, const UnitSystem& units = {});

    const SolverConfig1e& config() const { return sc_; }
    WignerState step(const WignerState& f, StepReport1e* report = nullptr) const;
    // Replace the kernel, keeping the advection tables.
    void set_kernel(const PotentialKernel& K);
    const PotentialKernel& kernel() const { return K_; }

private:
    void b1_step(WignerState& f) const;

    WignerGrid grid_;
    FieldConfig fields_;
    UnitSystem units_;
    SolverConfig1e sc_;
    PotentialKernel K_;
    Advection1e half_, full_;
    KernelPropagator kfull_, khalf_;
};

WignerState step_1e(const WignerState& f, const FieldConfig& cfg, const PotentialKernel& K, const SolverConfig1e& sc,
                    const UnitSystem& units = {}, StepReport1e* report = nullptr);

struct Evolution1e {
    WignerState final_state;
    // extras: mean_x, mean_Px[, mean_y, mean_Py], mean_P2, wrapped, edge_mass
    ObservableSeries series;
    std::vector<WignerState> snapshots;
    // Non-empty when the run stopped on the normalization guard (|int f - 1| > 1e-4).
    std::string failure;
};

// Runs ceil(T/dt) steps (dt shortened to divide T), recording every
// `output_every` steps and at the end. Snapshot states are kept at the
// requested times (rounded to the nearest step). Throws DomainError when
// the edge mass exceeds sc.edge_tolerance.
Evolution1e evolve_1e(const WignerState& f0, double T, const FieldConfig& cfg, const PotentialKernel& K,
                      const SolverConfig1e& sc, int output_every = 1, const std::vector<double>& snapshot_times = {},
                      const UnitSystem& units = {});

// Truncated Neumann series of the integral form along the characteristics:
//   f_0(t) = A(t) f0,  f_k(t) = A(t) f0 + int_0^t dt' A(t - t') G f_{k-1}(t')
// with G the kernel action plus the B1 term and every time integral done by
// the composite midpoint rule with sc.neumann_nodes nodes. Refuses (CostGuardError)
// when order > 3 or the work estimate exceeds 5e8 cell updates.
WignerState neumann_solve_1e(const WignerState& f0, double t, int order, const FieldConfig& cfg,
                             const PotentialKernel& K, const SolverConfig1e& sc = {}, const UnitSystem& units = {});

// Work estimate in advection cell updates used by the Neumann cost guard.
double neumann_work(std::size_t cells, int order, int nodes);

}  // namespace wigner2e
