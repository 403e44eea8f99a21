#pragma once

#include <string>
#include <vector>

#include "wigner2e/core.hpp"
#include "wigner2e/trajectories.hpp"

namespace wigner2e {

// Interpolation used to evaluate a state at the backward foot of a
// characteristic. spectral is trigonometric interpolation with the Nyquist
// mode dropped: exact for band-limited data and shifts compose exactly.
enum class Interpolation { spectral, linear, cubic };

const char* to_string(Interpolation m);
Interpolation interpolation_from_string(const std::string& s);

// Column-major n x n matrix S with (S f)_i = f(i - a), the periodic
// translation of samples by a cells. Every column sums to 1, so the sum of
// the samples is preserved.
std::vector<double> shift_matrix(int n, double a, Interpolation method);

// Free streaming plus magnetic rotation of a one-electron state over tau,
// f(tau, r, P) = f(0, r(-tau), P(-tau)). Position is treated as periodic,
// so the caller is responsible for keeping mass away from the edges (see
// edge_mass). For d = 2 with a field the drift and rotation are Strang
// split and the rotation by (e Bz(x)/m) tau is done with three shears.
class Advection1e {
public:
    Advection1e() = default;
    Advection1e(const WignerGrid& grid, const FieldConfig& fields, double tau, Interpolation method,
                const UnitSystem& units = {});

    double tau() const { return tau_; }
    void apply(const WignerState& in, WignerState& out) const;
    WignerState apply(const WignerState& in) const;

private:
    void drift(const double* in, double* out) const;
    void rotate(const double* in, double* out) const;

    WignerGrid grid_;
    double tau_ = 0.0;
    bool rotation_ = false;
    // Drift matrices per momentum index, for the full (d=1) or half (d=2 with field) drift.
    std::vector<std::vector<double>> drift_;
    // Shear matrices [ix][k] for the three-shear rotation: shear_a along Px
    // per Py index, shear_b along Py per Px index.
    std::vector<std::vector<std::vector<double>>> shear_a_, shear_b_;
    mutable std::vector<double> scratch_;
};

// Free streaming of both electrons of a d = 1 two-electron state.
class Advection2e {
public:
    Advection2e() = default;
    Advection2e(const WignerGrid& grid, double tau, Interpolation method, const UnitSystem& units = {});

    double tau() const { return tau_; }
    void apply(const WignerState& in, WignerState& out) const;
    WignerState apply(const WignerState& in) const;

private:
    WignerGrid grid_;
    double tau_ = 0.0;
    std::vector<std::vector<double>> drift_;
    mutable std::vector<double> scratch_;
};

// Probability in the band of the outermost `cells` position cells of every
// position axis (signed integral of f, so interpolation ripples cancel).
double edge_mass(const WignerState& f, int cells = 2);

}  // namespace wigner2e
