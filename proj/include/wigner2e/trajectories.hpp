#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "wigner2e/core.hpp"
#include "wigner2e/potentials.hpp"

namespace wigner2e {

// Planar vector; y stays 0 for d = 1.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    Vec2& operator-=(Vec2 o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    friend Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
    friend Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
    friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    double norm2() const { return x * x + y * y; }
};

// Magnetic field B(r) = (0, 0, B0 + B1 x) normal to the plane plus an
// external electric potential. Magnetic terms require d = 2.
struct FieldConfig {
    double B0 = 0.0;
    double B1 = 0.0;
    PotentialSpec potential;

    void validate(int d) const;
    bool has_magnetic() const { return B0 != 0.0 || B1 != 0.0; }
    double Bz(Vec2 r) const { return B0 + B1 * r.x; }
};

// (e/m) P x B = (e/m) (Py Bz, -Px Bz).
Vec2 magnetic_force(Vec2 P, Vec2 r, const FieldConfig& cfg, const UnitSystem& units = {}, int d = 2);

struct PairForce {
    Vec2 F12;
    Vec2 F21;
};

// Softened repulsive pair force of the interaction spec with strength coupling_lambda.
// F12 = -dV(|r1 - r2|)/dr1 points from electron 2 towards electron 1.
PairForce coulomb_force(Vec2 r1, Vec2 r2, const UnitSystem& units, const PotentialSpec& interaction);

// Force of the external potential at r (d components used).
Vec2 external_force(Vec2 r, const FieldConfig& cfg, int d);

// Default step min(1e-3, 0.01/omega_c) with omega_c = e B0 / m.
double default_step(const FieldConfig& cfg, const UnitSystem& units = {});

struct PhasePoint {
    Vec2 r;
    Vec2 P;
};

struct PathSample {
    double t;
    PhasePoint point;
};

struct IntegratorOptions {
    // Largest step; the interval is split into ceil(|T| / h_max) equal steps.
    // 0 selects default_step.
    double h_max = 0.0;
    bool record = true;
};

struct Path1e {
    std::vector<PathSample> samples;
    double h = 0.0;
    const PhasePoint& end() const { return samples.back().point; }
};

// Drift-kick-drift leapfrog with a Boris rotation in the kick. Integrating
// with t_to < t_from runs the characteristic backward.
Path1e integrate_1e(PhasePoint start, double t_from, double t_to, int d, const FieldConfig& cfg,
                    const IntegratorOptions& opt = {}, const UnitSystem& units = {});

struct TwoBodyPoint {
    Vec2 r1, P1, r2, P2;
};

struct TwoBodySample {
    double t;
    TwoBodyPoint point;
    double energy;
};

struct TwoBodyTrajectory {
    std::vector<TwoBodySample> samples;
    double h = 0.0;
    const TwoBodyPoint& end() const { return samples.back().point; }
};

// Everything a two-body path depends on besides its start.
struct TwoBodySystem {
    int d = 1;
    UnitSystem units;
    PotentialSpec interaction = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0);
    FieldConfig fields;
    // When set, the pair force is replaced by this constant F12 (F21 = -F12).
    std::optional<Vec2> frozen_pair_force;

    void validate() const;
    // sum |P_j|^2 / 2m + V_pair(|r1 - r2|) + sum V_ext(r_j)
    double energy(const TwoBodyPoint& p) const;
};

TwoBodyTrajectory integrate_2e(const TwoBodyPoint& start, double t_from, double t_to, const TwoBodySystem& sys,
                               const IntegratorOptions& opt = {});

// End point only; no allocation, used by the force model.
TwoBodyPoint propagate_2e(TwoBodyPoint p, double t_from, double t_to, const TwoBodySystem& sys, double h_max);

// CSV: t, r1, P1, r2, P2 (d components each), energy.
void write_trajectory_csv(const TwoBodyTrajectory& traj, int d, std::ostream& os);

}  // namespace wigner2e
