#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "wigner2e/advection.hpp"
#include "wigner2e/diagnostics.hpp"
#include "wigner2e/potentials.hpp"
#include "wigner2e/single_electron.hpp"

namespace wigner2e {

// Default cell cap of the two-electron grid, overridable by the environment
// variable WIGNER2E_MAX_CELLS.
std::size_t default_max_cells();

struct SolverConfig2e {
    double dt = 1e-3;
    Interpolation interpolation = Interpolation::spectral;
    std::size_t max_cells = default_max_cells();
    double edge_tolerance = 1e-4;

    void validate() const;
};

// Throws CostGuardError when n_x^2 n_p^2 exceeds the cap.
void check_cost_2e(const WignerGrid& grid, const SolverConfig2e& sc);

struct Kernels2e {
    PotentialKernel ext1;
    PotentialKernel ext2;
    InteractionKernel interaction;
};

// exp(h G) of the interaction generator G f = apply_kernel(K_int, f). Along
// every line n1 + n2 = c of a position pair the generator is circulant, so
// the exponential is exact, orthogonal and conserves both the mass and the
// total momentum of every line.
class InteractionPropagator {
public:
    InteractionPropagator() = default;
    InteractionPropagator(const InteractionKernel& K, double h);

    bool is_identity() const { return identity_; }
    void apply(const WignerState& in, WignerState& out) const;

private:
    WignerGrid grid_;
    bool identity_ = true;
    // dense column-major line matrices, [displacement][line]
    std::vector<std::vector<std::vector<double>>> lines_;
};

struct StepReport2e {
    double wrapped = 0.0;
    double edge_mass = 0.0;
};

// A(dt/2) E(dt/2) I(dt) E(dt/2) A(dt/2) with A the free streaming of both
// electrons, E the external kernel exponentials of both electrons and I the
// interaction exponential. With K_int = 0 a step is exactly the tensor
// product of two one-electron Strang steps.
class Propagator2e {
public:
    Propagator2e() = default;
    Propagator2e(const WignerGrid& grid, const Kernels2e& kernels, const SolverConfig2e& sc,
                 const UnitSystem& units = {});

    WignerState step(const WignerState& f, StepReport2e* report = nullptr) const;
    // Pieces used by the fused driver loop.
    void half_advection(const WignerState& in, WignerState& out) const { half_.apply(in, out); }
    void full_advection(const WignerState& in, WignerState& out) const { full_.apply(in, out); }
    // E(dt/2) I(dt) E(dt/2) in place.
    void collision_part(WignerState& f) const;
    const SolverConfig2e& config() const { return sc_; }
    const Kernels2e& kernels() const { return K_; }

private:
    WignerGrid grid_;
    SolverConfig2e sc_;
    Kernels2e K_;
    Advection2e half_, full_;
    KernelPropagator e1_, e2_;
    InteractionPropagator int_;
    mutable WignerState tmp_;
};

WignerState step_2e(const WignerState& f, const PotentialKernel& K_ext1, const PotentialKernel& K_ext2,
                    const InteractionKernel& K_int, const SolverConfig2e& sc, StepReport2e* report = nullptr);

// f(dt) = A(dt) [f1 (x) f2 + dt (V(1,1') + V(2,2') + V_int) f1 (x) f2], the
// initial product transported along the free characteristics plus dt times
// the kernel actions on the product.
WignerState first_order_increment(const WignerState& f1_0, const WignerState& f2_0, double dt,
                                  const PotentialKernel& K_ext1, const PotentialKernel& K_ext2,
                                  const InteractionKernel& K_int, Interpolation method = Interpolation::spectral);

struct Evolution2e {
    WignerState final_state;
    // extras: mean_x1, mean_P1, mean_x2, mean_P2, total_P, wrapped, edge_mass
    ObservableSeries series;
    std::vector<WignerState> snapshots;
    // Non-empty when the run stopped on the normalization guard (|int f - 1| > 1e-4).
    std::string failure;
};

// on_record sees the state at every recorded row.
Evolution2e evolve_2e(const WignerState& f0, double T, const Kernels2e& kernels, const SolverConfig2e& sc,
                      int output_every = 1, const std::vector<double>& snapshot_times = {},
                      const std::function<void(const WignerState&)>& on_record = {});

// Observables row of a pair state as recorded by evolve_2e.
ObservableSeries::Row pair_observables(const WignerState& f, double wrapped, double edge);
std::vector<std::string> pair_observable_columns();

}  // namespace wigner2e
