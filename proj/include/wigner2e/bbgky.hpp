#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wigner2e/diagnostics.hpp"
#include "wigner2e/potentials.hpp"
#include "wigner2e/single_electron.hpp"

namespace wigner2e {

struct CoupledState {
    WignerState f1;
    WignerState f2;
    double time = 0.0;

    // Grids match and both factors are normalized within tol.
    void validate(double tol = 1e-6) const;
    // f1 (x) f2, separable by construction.
    WignerState pair_state() const;
};

struct BbgkyConfig {
    UnitSystem units;
    // Pair interaction shape; the coupling prefactor is units.coupling_lambda.
    PotentialSpec interaction = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0);
    FieldConfig fields1, fields2;
    // External one-electron kernels; an empty kernel means no external potential.
    PotentialKernel ext1, ext2;
    // The reduced kernels are rebuilt from the partner densities every k steps.
    int refresh_every = 1;
    // Rescale each factor to unit mass after every step.
    bool renormalize = true;

    void validate() const;
};

// Self-consistent mean-field propagator: each electron moves in its external
// kernel plus the reduced kernel generated by the other electron's density.
class BbgkyPropagator {
public:
    BbgkyPropagator(const WignerGrid& grid, const BbgkyConfig& cfg, const SolverConfig1e& sc);

    CoupledState step(const CoupledState& s);
    // Rebuild the reduced kernels on the next step regardless of the cadence.
    void invalidate() { since_refresh_ = -1; }
    const PairKernelTable& table() const { return *table_; }
    // Integrals of both factors after the last step, before renormalization.
    std::pair<double, double> raw_norms() const { return raw_norms_; }

private:
    WignerGrid grid_;
    BbgkyConfig cfg_;
    SolverConfig1e sc_;
    std::shared_ptr<const PairKernelTable> table_;
    Propagator1e p1_, p2_;
    int since_refresh_ = -1;
    std::pair<double, double> raw_norms_{1.0, 1.0};
};

// Refreshes both reduced kernels from the current densities, then advances
// each factor by one single-electron step.
CoupledState bbgky_step(const CoupledState& s, const BbgkyConfig& cfg, const SolverConfig1e& sc);

struct EvolutionBbgky {
    CoupledState final_state;
    // purity1/2 of the factors, separability 0 by construction;
    // extras: norm2, mean_x1, mean_P1, mean_x2, mean_P2, total_P, raw_drift
    // (largest |int f_j - 1| of any step so far, before renormalization)
    ObservableSeries series;
    std::vector<CoupledState> snapshots;
    // Non-empty when the run stopped on the normalization guard (|int f_j - 1| > 1e-4).
    std::string failure;
};

EvolutionBbgky evolve_bbgky(const CoupledState& s0, double T, const BbgkyConfig& cfg, const SolverConfig1e& sc,
                            int output_every = 1, const std::vector<double>& snapshot_times = {});

// L2 distance of the final f1 for each refresh cadence k against k = 1.
std::vector<double> refresh_convergence(const CoupledState& s0, double T, const BbgkyConfig& cfg,
                                        const SolverConfig1e& sc, const std::vector<int>& cadences);

struct NonlinearityReport {
    double c = 1.0;
    // ||P[c f1_0] - c P[f1_0]|| / ||c P[f1_0]|| for the reconstructed pair
    // state P = f1 (x) f2 at T, in the L2 grid norm. Scaling f1_0 by c scales
    // the initial pair state by c, so a linear evolution gives 0.
    double deviation = 0.0;
    // Same for the factor f1 alone.
    double factor_deviation = 0.0;
    // ||f2[c f1_0] - f2[f1_0]|| / ||f2[f1_0]||.
    double partner_deviation = 0.0;
};

// Runs the raw coupled evolution (no renormalization) from (f1_0, f2_0) and
// from (c f1_0, f2_0) up to T and compares them.
NonlinearityReport nonlinearity_probe(const CoupledState& s0, double T, double c, const BbgkyConfig& cfg,
                                      const SolverConfig1e& sc);

struct CoupledIterate {
    // int_0^t dt' A(t - t') V[n2^0(t')] f1^0(t')
    WignerState first;
    // int_0^t dt' int_0^t' dt'' A(t - t') V[n(delta f2(t'))] f1^0(t') with
    // delta f2(t') = A(t' - t'') V[n1^0(t'')] f2^0(t''), the contribution that
    // only appears through the partner equation.
    WignerState nested;
    // Second Neumann term of the first equation with the partner frozen at
    // f2^0: int_0^t dt' A(t - t') V[n2^0(t')] int_0^t' dt'' A(t' - t'') V[n2^0(t'')] f1^0(t'').
    WignerState iterated;
};

// Largest micro-grid accepted by coupled_first_iterate (n_x and n_p per axis).
inline constexpr int kCoupledIterateMaxCells = 4;

// Leading terms of the coupled integral equations with all one-electron
// operators dropped except free streaming; f_j^0(t) = A(t) f_j0. Every time
// integral uses the composite midpoint rule with `nodes` nodes. Refuses
// (CostGuardError) grids beyond kCoupledIterateMaxCells.
CoupledIterate coupled_first_iterate(const WignerState& f1_0, const WignerState& f2_0, double t,
                                     const UnitSystem& units, const PotentialSpec& interaction, int nodes = 8);

// Nested term by explicit nested loops over every phase-space and transfer
// index with the full two-electron kernel values; an independent check of
// coupled_first_iterate on micro-grids.
WignerState coupled_nested_term_direct(const WignerState& f1_0, const WignerState& f2_0, double t,
                                       const UnitSystem& units, const PotentialSpec& interaction, int nodes = 8);

}  // namespace wigner2e
