#include "wigner2e/force_model.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <fmt/format.h>
#include <random>

#include "wigner2e/errors.hpp"
#include "wigner2e/parallel.hpp"

namespace wigner2e {

void ForceModelConfig::validate() const {
    system.validate();
    if (!(h_max > 0.0) || !std::isfinite(h_max)) throw ValidationError("ForceModelConfig: h_max must be positive");
}

namespace {

double packet_value(const GaussianPacket& g, Vec2 r, Vec2 P, int d) {
    const double rr[2] = {r.x, r.y}, pp[2] = {P.x, P.y};
    return gaussian_wigner(g, std::span<const double>(rr, d), std::span<const double>(pp, d));
}

double product_value(const TwoBodyPoint& p, const GaussianPacket& a, const GaussianPacket& b, int d) {
    return packet_value(a, p.r1, p.P1, d) * packet_value(b, p.r2, p.P2, d);
}

void check_packets(const GaussianPacket& a, const GaussianPacket& b, int d) {
    a.validate(d);
    b.validate(d);
}

// evaluate_fw without input checks
double pullback_value(const TwoBodyPoint& point, double t, const GaussianPacket& f1_0, const GaussianPacket& f2_0,
                      const ForceModelConfig& cfg) {
    return product_value(propagate_2e(point, t, 0.0, cfg.system, cfg.h_max), f1_0, f2_0, cfg.system.d);
}

Vec2 total_force(Vec2 r, Vec2 P, Vec2 pair, const TwoBodySystem& sys) {
    return pair + external_force(r, sys.fields, sys.d) + magnetic_force(P, r, sys.fields, sys.units, sys.d);
}

}  // namespace

double evaluate_fw(const TwoBodyPoint& point, double t, const GaussianPacket& f1_0, const GaussianPacket& f2_0,
                   const ForceModelConfig& cfg) {
    if (!(t >= 0.0)) throw ValidationError("evaluate_fw: t must be >= 0");
    cfg.validate();
    check_packets(f1_0, f2_0, cfg.system.d);
    return pullback_value(point, t, f1_0, f2_0, cfg);
}

double solinc_fw(const TwoBodyPoint& point, double dt, const GaussianPacket& f1_0, const GaussianPacket& f2_0,
                 const ForceModelConfig& cfg) {
    cfg.validate();
    check_packets(f1_0, f2_0, cfg.system.d);
    const auto& sys = cfg.system;
    const PairForce F = sys.frozen_pair_force ? PairForce{*sys.frozen_pair_force, -*sys.frozen_pair_force}
                                              : coulomb_force(point.r1, point.r2, sys.units, sys.interaction);
    const double im = 1.0 / sys.units.mass;
    TwoBodyPoint q;
    q.r1 = point.r1 - (dt * im) * point.P1;
    q.r2 = point.r2 - (dt * im) * point.P2;
    q.P1 = point.P1 - dt * total_force(point.r1, point.P1, F.F12, sys);
    q.P2 = point.P2 - dt * total_force(point.r2, point.P2, F.F21, sys);
    return product_value(q, f1_0, f2_0, sys.d);
}

std::vector<TwoBodyPoint> sample_product(const GaussianPacket& f1_0, const GaussianPacket& f2_0, int d,
                                         std::size_t n, int batches, std::uint64_t seed) {
    check_packets(f1_0, f2_0, d);
    if (batches < 1) throw ValidationError("sample_product: batches must be >= 1");
    const int dims = 4 * d;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::vector<double>> shifts(batches, std::vector<double>(dims));
    for (auto& s : shifts)
        for (double& v : s) v = uni(rng);
    const boost::math::normal normal;
    std::vector<TwoBodyPoint> out(n);
    const GaussianPacket* pk[2] = {&f1_0, &f2_0};
    std::vector<double> u(dims);
    for (int b = 0; b < batches; ++b) {
        const std::size_t begin = n * b / batches, end = n * (b + 1) / batches;
        boost::random::sobol sobol(dims);
        const double scale = 1.0 / (double(sobol.max()) + 1.0);
        for (std::size_t i = begin; i < end; ++i) {
            for (int k = 0; k < dims; ++k) {
                double v = double(sobol()) * scale + shifts[b][k];
                v -= std::floor(v);
                u[k] = std::clamp(v, 1e-16, 1.0 - 1e-16);
            }
            Vec2* slots[2][2] = {{&out[i].r1, &out[i].P1}, {&out[i].r2, &out[i].P2}};
            for (int e = 0; e < 2; ++e) {
                const GaussianPacket& g = *pk[e];
                for (int a = 0; a < d; ++a) {
                    const double x = g.center_r[a] + g.sigma[a] * boost::math::quantile(normal, u[2 * d * e + a]);
                    const double p =
                        g.center_p[a] + g.sigma_p(a) * boost::math::quantile(normal, u[2 * d * e + d + a]);
                    (a == 0 ? slots[e][0]->x : slots[e][0]->y) = x;
                    (a == 0 ? slots[e][1]->x : slots[e][1]->y) = p;
                }
            }
        }
    }
    return out;
}

void EnsembleConfig::validate() const {
    if (n_particles < 1) throw ValidationError("EnsembleConfig: n_particles must be >= 1");
    if (batches < 8) throw ValidationError("EnsembleConfig: at least 8 batches are needed for the standard errors");
    if (n_particles < std::size_t(batches))
        throw ValidationError("EnsembleConfig: n_particles must be at least the batch count");
    grid.validate();
    if (grid.n_x % 2 || grid.n_p % 2) throw ValidationError("EnsembleConfig: estimator grid needs even n_x and n_p");
}

namespace {

struct Cic {
    int i0;
    double w0;
};

// Linear weights onto nodes c_i = origin + (i + 1/2) h, clamped to the edge nodes.
Cic cic(double x, double origin, double h, int n) {
    const double u = (x - origin) / h - 0.5;
    if (!(u > 0.0)) return {0, 1.0};
    if (u >= n - 1) return {n - 2 >= 0 ? n - 2 : 0, n >= 2 ? 0.0 : 1.0};
    const int i = int(u);
    return {i, 1.0 - (u - i)};
}

Cic cic_x(double x, const WignerGrid& g) { return cic(x, g.x_min, g.dx(), g.n_x); }
Cic cic_p(double p, const WignerGrid& g) { return cic(p, -0.5 * g.n_p * g.dp(), g.dp(), g.n_p); }

double comp(Vec2 v, int a) { return a == 0 ? v.x : v.y; }

bool inside(const TwoBodyPoint& p, const WignerGrid& g) {
    auto in = [&](Vec2 r, Vec2 P) {
        for (int a = 0; a < g.d; ++a) {
            if (comp(r, a) < g.x_min || comp(r, a) > g.x_max) return false;
            if (std::abs(comp(P, a)) > g.p_max()) return false;
        }
        return true;
    };
    return in(p.r1, p.P1) && in(p.r2, p.P2);
}

template <class It>
void deposit_range_1e(It begin, It end, int electron, const WignerGrid& g, double w, WignerState& out) {
    const int d = g.d, nx = g.n_x, np = g.n_p;
    const double scale = w / out.cell_volume();
    for (It it = begin; it != end; ++it) {
        const Vec2 r = electron == 1 ? it->r1 : it->r2;
        const Vec2 P = electron == 1 ? it->P1 : it->P2;
        if (d == 1) {
            const Cic cx = cic_x(r.x, g), cp = cic_p(P.x, g);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const double wt = (a ? 1.0 - cx.w0 : cx.w0) * (b ? 1.0 - cp.w0 : cp.w0);
                    if (wt == 0.0) continue;
                    out[std::size_t(cx.i0 + a) * np + (cp.i0 + b)] += scale * wt;
                }
        } else {
            const Cic c[4] = {cic_x(r.x, g), cic_x(r.y, g), cic_p(P.x, g), cic_p(P.y, g)};
            for (int m = 0; m < 16; ++m) {
                double wt = 1.0;
                int idx[4];
                for (int k = 0; k < 4; ++k) {
                    const int bit = (m >> k) & 1;
                    wt *= bit ? 1.0 - c[k].w0 : c[k].w0;
                    idx[k] = c[k].i0 + bit;
                }
                if (wt == 0.0) continue;
                out[((std::size_t(idx[0]) * nx + idx[1]) * np + idx[2]) * np + idx[3]] += scale * wt;
            }
        }
    }
}

double raw_purity(const WignerState& f) {
    double s = 0.0;
    for (double v : f.values()) s += v * v;
    return std::pow(2.0 * kPi * kHbar, f.grid().d) * s * f.cell_volume();
}

WignerGrid coarsened(const WignerGrid& g) {
    return WignerGrid::make(g.d, g.n_x / 2, g.x_min, g.x_max, 0.5 * g.coherence_length, g.n_p / 2);
}

}  // namespace

WignerState deposit_1e(const std::vector<TwoBodyPoint>& points, int electron, const WignerGrid& grid,
                       double weight) {
    if (electron != 1 && electron != 2) throw ValidationError("deposit_1e: electron must be 1 or 2");
    WignerState out = WignerState::zeros(grid, Arity::one);
    deposit_range_1e(points.begin(), points.end(), electron, grid, weight, out);
    return out;
}

WignerState deposit_2e(const std::vector<TwoBodyPoint>& points, const WignerGrid& g, double weight) {
    if (g.d != 1) throw ValidationError("deposit_2e: d = 1 only");
    WignerState out = WignerState::zeros(g, Arity::two);
    const int R = g.n_x, Q = g.n_p;
    const double scale = weight / out.cell_volume();
    for (const auto& p : points) {
        const Cic c[4] = {cic_x(p.r1.x, g), cic_x(p.r2.x, g), cic_p(p.P1.x, g), cic_p(p.P2.x, g)};
        for (int m = 0; m < 16; ++m) {
            double wt = 1.0;
            int idx[4];
            for (int k = 0; k < 4; ++k) {
                const int bit = (m >> k) & 1;
                wt *= bit ? 1.0 - c[k].w0 : c[k].w0;
                idx[k] = c[k].i0 + bit;
            }
            if (wt == 0.0) continue;
            out[((std::size_t(idx[0]) * R + idx[1]) * Q + idx[2]) * Q + idx[3]] += scale * wt;
        }
    }
    return out;
}

PurityEstimate ensemble_purity(const std::vector<TwoBodyPoint>& points, int electron, const WignerGrid& grid,
                               int batches, double shear) {
    if (batches < 2) throw ValidationError("ensemble_purity: batches must be >= 2");
    if (shear != 0.0) {
        std::vector<TwoBodyPoint> moved(points);
        for (auto& p : moved) {
            p.r1 -= shear * p.P1;
            p.r2 -= shear * p.P2;
        }
        return ensemble_purity(moved, electron, grid, batches, 0.0);
    }
    if (grid.n_x % 2 || grid.n_p % 2) throw ValidationError("ensemble_purity: grid needs even n_x and n_p");
    const WignerGrid coarse = coarsened(grid);
    const std::size_t n = points.size();
    auto extrapolated = [&](std::size_t b, std::size_t e, double* raw) {
        const double w = 1.0 / double(e - b);
        WignerState fine = WignerState::zeros(grid, Arity::one), crs = WignerState::zeros(coarse, Arity::one);
        deposit_range_1e(points.begin() + b, points.begin() + e, electron, grid, w, fine);
        deposit_range_1e(points.begin() + b, points.begin() + e, electron, coarse, w, crs);
        const double pf = raw_purity(fine), pc = raw_purity(crs);
        if (raw) *raw = pf;
        return (4.0 * pf - pc) / 3.0;
    };
    PurityEstimate est;
    est.value = extrapolated(0, n, &est.raw);
    std::vector<double> per(batches);
    parallel_for(std::size_t(batches), [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) per[b] = extrapolated(n * b / batches, n * (b + 1) / batches, nullptr);
    });
    double mean = 0.0;
    for (double v : per) mean += v / batches;
    double var = 0.0;
    for (double v : per) var += (v - mean) * (v - mean);
    var /= (batches - 1);
    est.standard_error = std::sqrt(var / batches);
    return est;
}

namespace {

std::vector<std::string> ensemble_columns() {
    return {"mean_x1",     "mean_P1",     "mean_x2",        "mean_P2",         "purity1_se",
            "purity2_se",  "purity1_raw", "purity2_raw",    "empty_fraction",  "outside_fraction"};
}

ObservableSeries::Row ensemble_row(double t, double mass, const std::vector<TwoBodyPoint>& pts, const EnsembleConfig& ec,
                                   WignerState& m1, WignerState& m2, WignerState& pair) {
    const double w = 1.0 / double(pts.size());
    m1 = deposit_1e(pts, 1, ec.grid, w);
    m2 = deposit_1e(pts, 2, ec.grid, w);
    const bool with_pair = ec.pair_deposit && ec.grid.d == 1;
    if (with_pair) pair = deposit_2e(pts, ec.grid, w);
    const double shear = t / mass;
    const PurityEstimate e1 = ensemble_purity(pts, 1, ec.grid, ec.batches, shear);
    const PurityEstimate e2 = ensemble_purity(pts, 2, ec.grid, ec.batches, shear);
    double mx1 = 0, mp1 = 0, mx2 = 0, mp2 = 0;
    std::size_t outside = 0;
    for (const auto& p : pts) {
        mx1 += p.r1.x;
        mp1 += p.P1.x;
        mx2 += p.r2.x;
        mp2 += p.P2.x;
        outside += inside(p, ec.grid) ? 0 : 1;
    }
    std::size_t empty = 0;
    for (double v : m1.values()) empty += v == 0.0 ? 1 : 0;
    ObservableSeries::Row row;
    row.t = t;
    row.norm = m1.integral();
    row.purity1 = e1.value;
    row.purity2 = e2.value;
    row.separability = with_pair ? separability_metric(pair) : std::nan("");
    row.extra = {mx1 * w,         mp1 * w, mx2 * w, mp2 * w, e1.standard_error, e2.standard_error, e1.raw, e2.raw,
                 double(empty) / double(m1.size()), double(outside) * w};
    return row;
}

}  // namespace

EnsembleResult forward_ensemble(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double T,
                                const EnsembleConfig& ec, const ForceModelConfig& cfg, int outputs,
                                const std::vector<double>& snapshot_times) {
    ec.validate();
    cfg.validate();
    if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("forward_ensemble: T must be nonnegative and finite");
    if (outputs < 1) throw ValidationError("forward_ensemble: outputs must be >= 1");
    if (ec.grid.d != cfg.system.d) throw ValidationError("forward_ensemble: estimator grid and system dimension differ");
    EnsembleResult res;
    res.series = ObservableSeries(ensemble_columns());
    res.particles = sample_product(f1_0, f2_0, cfg.system.d, ec.n_particles, ec.batches, ec.seed);
    auto& pts = res.particles;
    std::vector<int> snap_rows;
    for (double ts : snapshot_times) {
        const double u = T > 0.0 ? ts / T * outputs : 0.0;
        if (ts < 0.0 || ts > T * (1.0 + 1e-12) || std::abs(u - std::round(u)) > 1e-9)
            throw ValidationError("forward_ensemble: snapshot times must be output times in [0, T]");
        snap_rows.push_back(int(std::lround(u)));
    }
    auto snapshot = [&](int k) {
        for (int r : snap_rows)
            if (r == k) res.snapshots.emplace_back(res.marginal1, res.marginal2);
    };
    res.series.add(ensemble_row(0.0, cfg.system.units.mass, pts, ec, res.marginal1, res.marginal2, res.pair));
    snapshot(0);
    for (int k = 1; k <= outputs && T > 0.0; ++k) {
        const double t0 = T * (k - 1) / outputs, t1 = T * k / outputs;
        parallel_for(pts.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) pts[i] = propagate_2e(pts[i], t0, t1, cfg.system, cfg.h_max);
        });
        res.series.add(ensemble_row(t1, cfg.system.units.mass, pts, ec, res.marginal1, res.marginal2, res.pair));
        snapshot(k);
    }
    return res;
}

namespace {

TwoBodyPoint centre_point(const GaussianPacket& a, const GaussianPacket& b, int d) {
    TwoBodyPoint p;
    p.r1 = {a.center_r[0], d == 2 ? a.center_r[1] : 0.0};
    p.P1 = {a.center_p[0], d == 2 ? a.center_p[1] : 0.0};
    p.r2 = {b.center_r[0], d == 2 ? b.center_r[1] : 0.0};
    p.P2 = {b.center_p[0], d == 2 ? b.center_p[1] : 0.0};
    return p;
}

}  // namespace

ClosestApproach closest_approach(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double t_max,
                                 const ForceModelConfig& cfg) {
    cfg.validate();
    check_packets(f1_0, f2_0, cfg.system.d);
    if (!(t_max > 0.0)) throw ValidationError("closest_approach: t_max must be positive");
    IntegratorOptions opt;
    opt.h_max = cfg.h_max;
    const auto traj = integrate_2e(centre_point(f1_0, f2_0, cfg.system.d), 0.0, t_max, cfg.system, opt);
    ClosestApproach best{0.0, std::numeric_limits<double>::infinity(), {}};
    for (const auto& s : traj.samples) {
        const double dist = std::sqrt((s.point.r1 - s.point.r2).norm2());
        if (dist < best.distance) best = {s.t, dist, s.point};
    }
    return best;
}

void ProbeSet::validate(int d) const {
    if (points_per_axis < 2) throw ValidationError("ProbeSet: points_per_axis must be >= 2");
    if (!(half_width > 0.0)) throw ValidationError("ProbeSet: half_width must be positive");
    for (auto [a, b] : sections)
        if (a < 0 || a >= 2 * d || b < 0 || b >= 2 * d) throw ValidationError("ProbeSet: section axis out of range");
    const std::size_t count = (sections.empty() ? 4 : sections.size()) * std::size_t(points_per_axis) * points_per_axis;
    if (count < 100) throw ValidationError(fmt::format("ProbeSet: {} probe points, at least 100 needed", count));
}

namespace {

double rank1_residual(const Eigen::MatrixXd& M) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    const double total = s.squaredNorm();
    if (total == 0.0) return 0.0;
    return std::sqrt(s.tail(s.size() - 1).squaredNorm() / total);
}

// Axis a of electron e: positions 0..d-1, momenta d..2d-1.
double& axis_ref(TwoBodyPoint& p, int electron, int a, int d) {
    Vec2& v = a < d ? (electron == 1 ? p.r1 : p.r2) : (electron == 1 ? p.P1 : p.P2);
    return (a % d) == 0 ? v.x : v.y;
}

std::string axis_name(int electron, int a, int d) {
    const char* comp[2] = {"x", "y"};
    return fmt::format("{}{}_{}", a < d ? "r" : "P", electron, comp[a % d]);
}

}  // namespace

CertificateReport separability_certificate(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double t,
                                           double lambda, const ProbeSet& probes, const ForceModelConfig& cfg) {
    const int d = cfg.system.d;
    probes.validate(d);
    check_packets(f1_0, f2_0, d);
    if (!(t >= 0.0)) throw ValidationError("separability_certificate: t must be >= 0");
    ForceModelConfig coulomb = cfg;
    coulomb.system.units.coupling_lambda = lambda;
    coulomb.system.frozen_pair_force.reset();
    coulomb.validate();

    CertificateReport rep;
    rep.t = t;
    rep.lambda = lambda;
    const TwoBodyPoint start = centre_point(f1_0, f2_0, d);
    rep.r1_ref = start.r1;
    rep.r2_ref = start.r2;
    rep.frozen_force = coulomb_force(start.r1, start.r2, coulomb.system.units, coulomb.system.interaction).F12;
    ForceModelConfig control = coulomb;
    control.system.frozen_pair_force = rep.frozen_force;
    rep.centre = propagate_2e(start, 0.0, t, coulomb.system, coulomb.h_max);

    auto spread = [&](const GaussianPacket& g, int a) {
        const double sp = g.sigma_p(a % d);
        if (a >= d) return sp;
        const double s = g.sigma[a], v = sp * t / coulomb.system.units.mass;
        return std::sqrt(s * s + v * v);
    };
    std::vector<std::pair<int, int>> sections = probes.sections;
    if (sections.empty()) sections = {{0, 0}, {d, d}, {0, d}, {d, 0}};
    const int n = probes.points_per_axis;
    for (auto [a1, a2] : sections) {
        const double h1 = probes.half_width * spread(f1_0, a1), h2 = probes.half_width * spread(f2_0, a2);
        Eigen::MatrixXd Mc(n, n), Mk(n, n);
        parallel_for(std::size_t(n) * n, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const int i = int(k) / n, j = int(k) % n;
                TwoBodyPoint p = rep.centre;
                axis_ref(p, 1, a1, d) += -h1 + 2.0 * h1 * i / (n - 1);
                axis_ref(p, 2, a2, d) += -h2 + 2.0 * h2 * j / (n - 1);
                Mc(i, j) = pullback_value(p, t, f1_0, f2_0, coulomb);
                Mk(i, j) = pullback_value(p, t, f1_0, f2_0, control);
            }
        });
        SectionResidual s{axis_name(1, a1, d) + "-" + axis_name(2, a2, d), rank1_residual(Mc), rank1_residual(Mk)};
        rep.coulomb_residual = std::max(rep.coulomb_residual, s.coulomb);
        rep.control_residual = std::max(rep.control_residual, s.control);
        rep.sections.push_back(s);
        rep.probes += std::size_t(n) * n;
    }
    // Gaussian density matrix: |rho(x + s/2, x - s/2)| ~ exp(-s^2 / (8 sigma^2)), <|s|> = sqrt(8/pi) sigma
    const double sigma = std::max(f1_0.sigma[0], f2_0.sigma[0]);
    const double sep = std::sqrt((rep.centre.r1 - rep.centre.r2).norm2());
    rep.expansion_ratio = sep > 0.0 ? std::sqrt(8.0 / kPi) * sigma / sep : std::numeric_limits<double>::infinity();
    return rep;
}

void CertificateReport::write(std::ostream& os) const {
    os << fmt::format("separability certificate\n  t = {:.6g}\n  lambda = {:.6g}\n", t, lambda);
    os << fmt::format("  centre r1 = ({:.6g}, {:.6g}) P1 = ({:.6g}, {:.6g}) r2 = ({:.6g}, {:.6g}) P2 = ({:.6g}, {:.6g})\n",
                      centre.r1.x, centre.r1.y, centre.P1.x, centre.P1.y, centre.r2.x, centre.r2.y, centre.P2.x,
                      centre.P2.y);
    os << fmt::format("  control force F12 = ({:.6e}, {:.6e}) frozen at r1* = ({:.6g}, {:.6g}), r2* = ({:.6g}, {:.6g})\n",
                      frozen_force.x, frozen_force.y, r1_ref.x, r1_ref.y, r2_ref.x, r2_ref.y);
    os << fmt::format("  probes = {}\n", probes);
    for (const auto& s : sections)
        os << fmt::format("  section {}: coulomb residual {:.6e}, control residual {:.6e}\n", s.name, s.coulomb,
                          s.control);
    os << fmt::format("  max coulomb residual = {:.6e}\n  max control residual = {:.6e}\n", coulomb_residual,
                      control_residual);
    os << fmt::format("  expansion ratio <|s|>/|r1 - r2| = {:.6g}\n", expansion_ratio);
}

WignerState force_state_on_grid(const GaussianPacket& f1_0, const GaussianPacket& f2_0, double t,
                                const WignerGrid& grid, const ForceModelConfig& cfg) {
    if (grid.d != 1 || cfg.system.d != 1) throw ValidationError("force_state_on_grid: d = 1 only");
    check_packets(f1_0, f2_0, 1);
    cfg.validate();
    if (!(t >= 0.0)) throw ValidationError("force_state_on_grid: t must be >= 0");
    WignerState out = WignerState::zeros(grid, Arity::two, t);
    const int R = grid.n_x, Q = grid.n_p;
    parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const std::size_t p2 = k % Q, p1 = (k / Q) % Q, r2 = (k / (std::size_t(Q) * Q)) % R,
                              r1 = k / (std::size_t(Q) * Q * R);
            TwoBodyPoint p;
            p.r1 = {grid.x(int(r1)), 0.0};
            p.r2 = {grid.x(int(r2)), 0.0};
            p.P1 = {grid.p(int(p1)), 0.0};
            p.P2 = {grid.p(int(p2)), 0.0};
            out[k] = pullback_value(p, t, f1_0, f2_0, cfg);
        }
    });
    return out;
}

}  // namespace wigner2e
