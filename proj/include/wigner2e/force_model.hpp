#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wigner2e/core.hpp"
#include "wigner2e/diagnostics.hpp"
#include "wigner2e/trajectories.hpp"

namespace wigner2e {

struct ForceModelConfig {
    TwoBodySystem system;
    // Largest integrator step of the two-body trajectories.
    double h_max = 1e-3;

    void validate() const;
};

// f(point, t) = f1_0(r1(0), P1(0)) f2_0(r2(0), P2(0)) with the two-body
// trajectory integrated backward from (point, t) and the closed-form
// Gaussian initial Wigner functions.
double evaluate_fw(const TwoBodyPoint& point, double t, const GaussianPacket& f1_0, const GaussianPacket& f2_0,
                   const ForceModelConfig& cfg);

// Small-step form: f1_0(r1 - dt P1/m, P1 - dt F12(r1, r2)) f2_0(r2 - dt P2/m, P2 - dt F21(r1, r2)).
double solinc_fw(const TwoBodyPoint& point, double dt, const GaussianPacket& f1_0, const GaussianPacket& f2_0,
                 const ForceModelConfig& cfg);

// Independent draws of the product Gaussian x - x0 ~ N(0, sigma^2),
// P - p0 ~ N(0, (hbar / 2 sigma)^2) per axis, from randomized Sobol points
// (one Cranley-Patterson shift per batch).
std::vector<TwoBodyPoint> sample_product(const GaussianPacket& f1_0, const GaussianPacket& f2_0, int d,
                                         std::size_t n, int batches, std::uint64_t seed);

struct EnsembleConfig {
    std::size_t n_particles = 100000;
    std::uint64_t seed = 1;
    // Estimator grid of one electron; n_x and n_p must be even (the purity
    // estimate extrapolates from this grid and its 2x coarsening).
    WignerGrid grid;
    // Independent randomizations used for the standard errors (>= 8).
    int batches = 8;
    // Deposit the two-electron state as well (d = 1 only).
    bool pair_deposit = true;

    void validate() const;
};

// Cloud-in-cell deposit of weighted points on a one-electron grid (node
// values at cell centres). Points beyond the outermost centres go to the
// edge nodes, so the deposited integral equals the total weight exactly.
WignerState deposit_1e(const std::vector<TwoBodyPoint>& points, int electron, const WignerGrid& grid,
                       double weight);
// Same for the d = 1 pair state.
WignerState deposit_2e(const std::vector<TwoBodyPoint>& points, const WignerGrid& grid, double weight);

struct PurityEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    // Purity of the deposit on the estimator grid before extrapolation.
    double raw = 0.0;
};

// Purity of the density sampled by `points` (electron 1 or 2): the smoothing
// bias of the cloud-in-cell deposit, O(h^2) in the cell size, is removed by
// Richardson extrapolation between the grid and its 2x coarsening. The
// standard error is the spread across the `batches` contiguous batches.
// With shear = t/m the points are deposited at (r - shear P, P), a
// volume-preserving map that leaves the purity unchanged and undoes the
// shear of free flight over t, so the estimator grid need not resolve it.
PurityEstimate ensemble_purity(const std::vector<TwoBodyPoint>& points, int electron, const WignerGrid& grid,
                               int batches, double shear = 0.0);

struct EnsembleResult {
    WignerState marginal1, marginal2;
    // Empty unless pair_deposit and d = 1.
    WignerState pair;
    // purity1/2 are the extrapolated ensemble purities, estimated in the
    // free-flight frame of the output time; separability from the pair
    // deposit (NaN without it). extras: mean_x1, mean_P1, mean_x2,
    // mean_P2, purity1_se, purity2_se, purity1_raw, purity2_raw,
    // empty_fraction, outside_fraction
    ObservableSeries series;
    std::vector<TwoBodyPoint> particles;
    // (marginal1, marginal2) at the requested snapshot times.
    std::vector<std::pair<WignerState, WignerState>> snapshots;
};

// Samples n_particles points from f1_0 f2_0, pushes them along their
// two-body trajectories and records the deposit observables at t = 0 and at
// `outputs` equally spaced times up to T. Reproducible for fixed
// (seed, n_particles) independently of the worker count. Snapshot times
// must be output times.
EnsembleResult forward_ensemble(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double T,
                                const EnsembleConfig& ec, const ForceModelConfig& cfg, int outputs = 1,
                                const std::vector<double>& snapshot_times = {});

struct ClosestApproach {
    double t = 0.0;
    double distance = 0.0;
    TwoBodyPoint point;
};

// Minimum of |r1 - r2| along the classical trajectory of the packet centres on [0, t_max].
ClosestApproach closest_approach(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double t_max,
                                 const ForceModelConfig& cfg);

struct ProbeSet {
    // Points per axis of every 2D section.
    int points_per_axis = 15;
    // Half-width of each section axis in units of the packet spread at t.
    double half_width = 2.5;
    // Sections as pairs of phase-space axes (electron 1 axis, electron 2
    // axis) with axes numbered r (0..d-1) then P (d..2d-1). Empty selects
    // (r, r), (P, P), (r, P), (P, r) along x.
    std::vector<std::pair<int, int>> sections;

    void validate(int d) const;
};

struct SectionResidual {
    std::string name;
    // sqrt(sum_{k>1} s_k^2 / sum_k s_k^2) of the sampled section matrix.
    double coulomb = 0.0;
    double control = 0.0;
};

struct CertificateReport {
    double t = 0.0;
    double lambda = 0.0;
    TwoBodyPoint centre;
    Vec2 r1_ref, r2_ref, frozen_force;
    std::vector<SectionResidual> sections;
    double coulomb_residual = 0.0;
    double control_residual = 0.0;
    std::size_t probes = 0;
    // <|s|> / |r1 - r2| of the packets at the section centre, with <|s|>
    // the mean off-diagonal extent of the density matrix.
    double expansion_ratio = 0.0;

    void write(std::ostream& os) const;
};

// Rank-1 residuals of 2D sections of f(t) around the forward-propagated
// packet centres, for the true pair force and for the control with the pair
// force frozen at F12(r1*, r2*), r_j* the initial packet centres.
CertificateReport separability_certificate(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double t,
                                           double lambda, const ProbeSet& probes, const ForceModelConfig& cfg);

// Force-model pair state evaluated pointwise on a d = 1 grid.
WignerState force_state_on_grid(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double t,
                                const WignerGrid& grid, const ForceModelConfig& cfg);

}  // namespace wigner2e
