#include "wigner2e/trajectories.hpp"

#include <cmath>
#include <fmt/format.h>

namespace wigner2e {

void FieldConfig::validate(int d) const {
    if (!std::isfinite(B0) || !std::isfinite(B1)) throw ValidationError("fields: B0 and B1 must be finite");
    if (d == 1 && has_magnetic()) throw ValidationError("fields: magnetic terms need d = 2");
    potential.validate(d);
}

Vec2 magnetic_force(Vec2 P, Vec2 r, const FieldConfig& cfg, const UnitSystem& units, int d) {
    if (d != 2) {
        if (cfg.has_magnetic()) throw ValidationError("magnetic_force: d = 1 with a nonzero magnetic field");
        return {};
    }
    const double w = units.charge / units.mass * cfg.Bz(r);
    return {w * P.y, -w * P.x};
}

PairForce coulomb_force(Vec2 r1, Vec2 r2, const UnitSystem& units, const PotentialSpec& interaction) {
    const Vec2 d = r1 - r2;
    const double rho = std::sqrt(d.norm2());
    if (rho == 0.0 || units.coupling_lambda == 0.0) return {};
    const double f = pair_force_magnitude(interaction.kind, units.coupling_lambda, interaction.softening, rho);
    const Vec2 F = (f / rho) * d;
    return {F, -F};
}

Vec2 external_force(Vec2 r, const FieldConfig& cfg, int d) {
    if (cfg.potential.kind == PotentialKind::none) return {};
    const double pos[2] = {r.x, r.y};
    double out[2] = {0.0, 0.0};
    cfg.potential.force(std::span<const double>(pos, d), std::span<double>(out, d));
    return {out[0], out[1]};
}

double default_step(const FieldConfig& cfg, const UnitSystem& units) {
    const double wc = std::abs(units.charge * cfg.B0 / units.mass);
    return wc > 0.0 ? std::min(1e-3, 0.01 / wc) : 1e-3;
}

namespace {

int step_count(double span, double h_max) {
    if (!(h_max > 0.0)) throw ValidationError("integrator: step h must be > 0");
    return std::max(1, int(std::ceil(std::abs(span) / h_max - 1e-12)));
}

// Kick of length h with electric force F and a magnetic rotation by the
// angle (e Bz / m) h. The half-angle uses tan, so the rotation is exact
// for a uniform field.
inline Vec2 kick(Vec2 P, Vec2 F, double wz, double h) {
    Vec2 Pm = P + (0.5 * h) * F;
    if (wz != 0.0) {
        const double t = std::tan(0.5 * wz * h);
        const double s = 2.0 * t / (1.0 + t * t);
        // P x (t z) = t (Py, -Px)
        const Vec2 Pp{Pm.x + t * Pm.y, Pm.y - t * Pm.x};
        Pm = {Pm.x + s * Pp.y, Pm.y - s * Pp.x};
    }
    return Pm + (0.5 * h) * F;
}

inline double magnetic_rate(const FieldConfig& cfg, const UnitSystem& u, Vec2 r) {
    return cfg.has_magnetic() ? u.charge / u.mass * cfg.Bz(r) : 0.0;
}

inline void step_1e(PhasePoint& p, double h, int d, const FieldConfig& cfg, const UnitSystem& u) {
    const double im = 1.0 / u.mass;
    p.r += (0.5 * h * im) * p.P;
    p.P = kick(p.P, external_force(p.r, cfg, d), magnetic_rate(cfg, u, p.r), h);
    p.r += (0.5 * h * im) * p.P;
}

// Same as coulomb_force(...).F12, inlined for the stepping loops.
inline Vec2 pair_force_12(Vec2 r1, Vec2 r2, const UnitSystem& u, const PotentialSpec& spec) {
    const Vec2 d = r1 - r2;
    const double rho2 = d.norm2();
    if (rho2 == 0.0 || u.coupling_lambda == 0.0) return {};
    const double q = rho2 + spec.softening * spec.softening;
    const double c = spec.kind == PotentialKind::coulomb3d ? u.coupling_lambda / (q * std::sqrt(q))
                                                           : u.coupling_lambda / q;
    return c * d;
}

inline void step_2e(TwoBodyPoint& p, double h, const TwoBodySystem& s) {
    const double im = 1.0 / s.units.mass;
    p.r1 += (0.5 * h * im) * p.P1;
    p.r2 += (0.5 * h * im) * p.P2;
    Vec2 F12, F21;
    if (s.frozen_pair_force) {
        F12 = *s.frozen_pair_force;
        F21 = -F12;
    } else {
        F12 = pair_force_12(p.r1, p.r2, s.units, s.interaction);
        F21 = -F12;
    }
    if (s.fields.potential.kind != PotentialKind::none) {
        F12 += external_force(p.r1, s.fields, s.d);
        F21 += external_force(p.r2, s.fields, s.d);
    }
    p.P1 = kick(p.P1, F12, magnetic_rate(s.fields, s.units, p.r1), h);
    p.P2 = kick(p.P2, F21, magnetic_rate(s.fields, s.units, p.r2), h);
    p.r1 += (0.5 * h * im) * p.P1;
    p.r2 += (0.5 * h * im) * p.P2;
}

}  // namespace

Path1e integrate_1e(PhasePoint start, double t_from, double t_to, int d, const FieldConfig& cfg,
                    const IntegratorOptions& opt, const UnitSystem& units) {
    cfg.validate(d);
    const double hmax = opt.h_max == 0.0 ? default_step(cfg, units) : opt.h_max;
    const int n = step_count(t_to - t_from, hmax);
    const double h = (t_to - t_from) / n;
    Path1e path;
    path.h = h;
    if (d == 1) start.r.y = start.P.y = 0.0;
    path.samples.push_back({t_from, start});
    PhasePoint p = start;
    for (int k = 1; k <= n; ++k) {
        step_1e(p, h, d, cfg, units);
        if (opt.record || k == n) path.samples.push_back({t_from + k * h, p});
    }
    return path;
}

void TwoBodySystem::validate() const {
    units.validate();
    if (d != 1 && d != 2) throw ValidationError("two-body system: d must be 1 or 2");
    fields.validate(d);
    if (units.coupling_lambda > 0.0) {
        if (!interaction.is_coulomb()) throw ValidationError("two-body system: interaction must be a Coulomb kind");
        if (!(interaction.softening > 0.0)) throw ValidationError("two-body system: softening must be > 0");
    }
}

double TwoBodySystem::energy(const TwoBodyPoint& p) const {
    const double kin = 0.5 / units.mass * (p.P1.norm2() + p.P2.norm2());
    double pot = 0.0;
    if (units.coupling_lambda > 0.0 && !frozen_pair_force)
        pot += pair_potential(interaction.kind, units.coupling_lambda, interaction.softening,
                              std::sqrt((p.r1 - p.r2).norm2()));
    if (fields.potential.kind != PotentialKind::none) {
        const double a[2] = {p.r1.x, p.r1.y}, b[2] = {p.r2.x, p.r2.y};
        pot += fields.potential.value(std::span<const double>(a, d)) + fields.potential.value(std::span<const double>(b, d));
    }
    return kin + pot;
}

TwoBodyTrajectory integrate_2e(const TwoBodyPoint& start, double t_from, double t_to, const TwoBodySystem& sys,
                               const IntegratorOptions& opt) {
    sys.validate();
    const double hmax = opt.h_max == 0.0 ? default_step(sys.fields, sys.units) : opt.h_max;
    const int n = step_count(t_to - t_from, hmax);
    const double h = (t_to - t_from) / n;
    TwoBodyTrajectory traj;
    traj.h = h;
    TwoBodyPoint p = start;
    traj.samples.push_back({t_from, p, sys.energy(p)});
    for (int k = 1; k <= n; ++k) {
        step_2e(p, h, sys);
        if (opt.record || k == n) traj.samples.push_back({t_from + k * h, p, sys.energy(p)});
    }
    return traj;
}

TwoBodyPoint propagate_2e(TwoBodyPoint p, double t_from, double t_to, const TwoBodySystem& sys, double h_max) {
    if (t_to == t_from) return p;
    const int n = step_count(t_to - t_from, h_max);
    const double h = (t_to - t_from) / n;
    for (int k = 0; k < n; ++k) step_2e(p, h, sys);
    return p;
}

void write_trajectory_csv(const TwoBodyTrajectory& traj, int d, std::ostream& os) {
    const char* ax[2] = {"x", "y"};
    os << "t";
    for (const char* name : {"r1", "P1", "r2", "P2"})
        for (int a = 0; a < d; ++a) os << ',' << name << '_' << ax[a];
    os << ",energy\n";
    for (const auto& s : traj.samples) {
        os << fmt::format("{:.17g}", s.t);
        for (const Vec2& v : {s.point.r1, s.point.P1, s.point.r2, s.point.P2}) {
            os << fmt::format(",{:.17g}", v.x);
            if (d == 2) os << fmt::format(",{:.17g}", v.y);
        }
        os << fmt::format(",{:.17g}\n", s.energy);
    }
}

}  // namespace wigner2e
