#pragma once

#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "wigner2e/core.hpp"

namespace wigner2e {

enum class PotentialKind { none, linear, quadratic, tabulated, coulomb2d, coulomb3d };

const char* to_string(PotentialKind k);
PotentialKind potential_kind_from_string(const std::string& s);

// External potential or pair interaction shape.
//   linear     V = strength * x
//   quadratic  V = strength/2 * |r - center|^2
//   coulomb3d  V = strength / sqrt(|r - center|^2 + eps^2)
//   coulomb2d  V = -strength * ln sqrt(|r - center|^2 + eps^2)
//   tabulated  V(x) linearly interpolated from samples at x0 + k*dx (d=1)
// Both Coulomb forms are repulsive for strength > 0.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::none;
    double strength = 0.0;
    double softening = 0.0;
    std::vector<double> center;
    double table_x0 = 0.0;
    double table_dx = 0.0;
    std::vector<double> samples;

    static PotentialSpec none();
    static PotentialSpec linear(double alpha);
    static PotentialSpec quadratic(double k);
    static PotentialSpec coulomb(PotentialKind kind, double strength, double softening, std::vector<double> center = {});
    static PotentialSpec tabulated(double x0, double dx, std::vector<double> samples);

    bool is_coulomb() const { return kind == PotentialKind::coulomb2d || kind == PotentialKind::coulomb3d; }
    void validate(int d) const;
    double value(std::span<const double> r) const;
    // -grad V
    void force(std::span<const double> r, std::span<double> out) const;
};

// Radial pair potential V(rho) of a Coulomb kind with prefactor lambda.
double pair_potential(PotentialKind kind, double lambda, double eps, double rho);
// -dV/drho.
double pair_force_magnitude(PotentialKind kind, double lambda, double eps, double rho);

struct KernelQuadrature {
    // Quadrature nodes over [-L_c, L_c] per momentum point (>= 8).
    int nodes_per_momentum = 16;
    // The potential difference is multiplied by a smooth window that is 1
    // for |s| <= (1 - taper_fraction) L_c and falls to 0 at |s| = L_c. This
    // removes the slowly decaying transfer tails caused by a hard cut.
    double taper_fraction = 0.25;
};

// Smooth (C-infinity) window used on the s-integration, see KernelQuadrature.
double s_window(double s, double coherence_length, double taper_fraction);

// One-electron Wigner kernel K(r, q_m) on transfers q_m = m dp,
// m in [-(n_p-1), n_p-1] per axis. Continuous normalization
//   K(r, q) = 1/(i hbar (2 pi hbar)^d) int ds exp(-i s.q/hbar) [V(r+s/2) - V(r-s/2)]
// acting as dp^d sum.
class PotentialKernel {
public:
    PotentialKernel() = default;
    PotentialKernel(WignerGrid grid, std::vector<double> values);
    static PotentialKernel zero(const WignerGrid& grid);

    const WignerGrid& grid() const { return grid_; }
    std::size_t transfers() const { return transfers_; }
    // Row of transfer values for a position cell; index (mx + n_p - 1)[*(2n_p-1) + my + n_p - 1].
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * transfers_, transfers_}; }
    double value(std::size_t r, int mx, int my = 0) const;
    std::span<const double> values() const { return values_; }
    bool is_zero() const { return zero_; }
    double max_abs() const;

    // dp^d * sum of |K| over the transfers from momentum cell n that leave
    // the window and are wrapped around.
    double wrapped_weight(std::size_t r, std::size_t n) const { return wrapped_[r * grid_.momentum_cells() + n]; }
    // Kernel folded onto the periodic momentum window: entry j (and jx*n_p+jy
    // in d=2) sums K over all transfers congruent to j modulo n_p.
    std::vector<double> periodic_row(std::size_t r) const;

private:
    void finalize();

    WignerGrid grid_;
    std::size_t transfers_ = 0;
    std::vector<double> values_;
    std::vector<double> wrapped_;
    bool zero_ = true;
};

PotentialKernel wigner_kernel_1e(const PotentialSpec& spec, const WignerGrid& grid, const KernelQuadrature& quad = {});

// Wigner kernel of the pair potential V(|delta|) evaluated at every grid
// displacement delta = r_i - r_j, i.e. the one-electron kernel of a point
// charge sitting at the origin. Shared by the two-electron kernel and the
// reduced kernels.
class PairKernelTable {
public:
    PairKernelTable() = default;
    PairKernelTable(const UnitSystem& units, const PotentialSpec& spec, const WignerGrid& grid,
                    const KernelQuadrature& quad = {});

    const WignerGrid& grid() const { return grid_; }
    double coupling() const { return lambda_; }
    PotentialKind kind() const { return kind_; }
    double softening() const { return eps_; }
    std::size_t transfers() const { return transfers_; }
    // Displacement index per axis: i1 - i2 + n_x - 1.
    std::size_t displacement_count() const { return displacements_; }
    std::span<const double> row(std::size_t disp) const { return {values_.data() + disp * transfers_, transfers_}; }
    bool is_zero() const { return lambda_ == 0.0; }

private:
    WignerGrid grid_;
    double lambda_ = 0.0;
    PotentialKind kind_ = PotentialKind::coulomb3d;
    double eps_ = 0.0;
    std::size_t transfers_ = 0;
    std::size_t displacements_ = 0;
    std::vector<double> values_;
};

// Cached construction keyed on (units.coupling_lambda, spec, grid).
std::shared_ptr<const PairKernelTable> pair_kernel_table(const UnitSystem& units, const PotentialSpec& spec,
                                                         const WignerGrid& grid);

// Two-electron Coulomb-Wigner kernel (d = 1). Only the q1 + q2 = 0 diagonal
// is stored: V_int(q1, q2; r1, r2) = delta_{q1+q2,0} / dp * K1(r1 - r2, q1).
class InteractionKernel {
public:
    InteractionKernel() = default;
    explicit InteractionKernel(std::shared_ptr<const PairKernelTable> table);

    const WignerGrid& grid() const { return table_->grid(); }
    const PairKernelTable& table() const { return *table_; }
    bool is_zero() const { return !table_ || table_->is_zero(); }
    // Full kernel value for transfers (m1, m2) and position cells (i1, i2).
    double value(int m1, int m2, int i1, int i2) const;
    // K1 at displacement index and transfer m.
    double diagonal(std::size_t disp, int m) const;
    // dp * sum of |K1| over transfers from (n1, n2) that are wrapped along their line.
    double wrapped_weight(std::size_t disp, std::size_t n1, std::size_t n2) const;

private:
    std::shared_ptr<const PairKernelTable> table_;
    std::vector<double> wrapped_;
};

// Cells with n1 + n2 = c inside an n_p x n_p momentum window: n1 runs over
// [first, first + length).
struct MomentumLine {
    int first;
    int length;
};
MomentumLine momentum_line(int n_p, int c);
// K1 row (transfers -(n_p-1)..n_p-1) folded modulo the line length.
void fold_onto_line(std::span<const double> row, int n_p, int length, std::vector<double>& out);

InteractionKernel coulomb_kernel_2e(const UnitSystem& units, const PotentialSpec& spec, const WignerGrid& grid);

// Independent evaluation of the two-electron kernel at one index by a double
// quadrature over (s1, s2) in rotated coordinates u = s1 - s2, w = (s1 + s2)/2.
double coulomb_wigner_kernel_direct(const UnitSystem& units, const PotentialSpec& spec, const WignerGrid& grid,
                                    int m1, int m2, int i1, int i2, const KernelQuadrature& quad = {});


// Mean-field kernel of electron 1 generated by the density of electron 2.
// Throws ValidationError when |int f_other - 1| > 1e-6 unless
// require_normalized is false.
PotentialKernel reduced_kernel(const WignerState& f_other, const PairKernelTable& table,
                               bool require_normalized = true);
PotentialKernel reduced_kernel(const WignerState& f_other, const UnitSystem& units, const PotentialSpec& spec,
                               const WignerGrid& grid);

// Position density n(r) = int dP f.
std::vector<double> position_density(const WignerState& f);

// Momentum convolution of a one-electron kernel with a one-electron state.
// The momentum window is closed periodically: a transfer that leaves it
// re-enters from the opposite edge, which keeps the increment integral at
// zero and the generator antisymmetric. For the interaction the wrap runs
// along lines of fixed n1 + n2, so P1 + P2 is conserved as well. The
// wrapped weight (integral of |flow| re-entered this way) is reported through
// `clipped` when given.
WignerState apply_kernel(const PotentialKernel& K, const WignerState& f, double* clipped = nullptr);
// Interaction convolution over (P1, P2) of a two-electron state.
WignerState apply_kernel(const InteractionKernel& K, const WignerState& f, double* clipped = nullptr);
// One-electron kernel acting on electron 1 or 2 of a two-electron state.
WignerState apply_kernel_to_electron(const PotentialKernel& K, const WignerState& f, int electron,
                                     double* clipped = nullptr);

// CSV dump: comment header with the grid descriptor, then row-major values.
void write_kernel_csv(const PotentialKernel& K, std::ostream& os);
void write_kernel_csv(const PairKernelTable& T, std::ostream& os);

}  // namespace wigner2e
