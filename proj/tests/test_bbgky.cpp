#include <doctest.h>

#include <cmath>

#include "wigner2e/bbgky.hpp"
#include "wigner2e/two_electron.hpp"

using namespace wigner2e;

namespace {

WignerGrid desk_grid(int n = 32) { return WignerGrid::make(1, n, -10.0, 10.0, 10.0, n); }

WignerState packet(const WignerGrid& g, double x0, double p0, double sigma = 1.0) {
    return make_gaussian_state(GaussianPacket{{x0}, {p0}, {sigma}}, g);
}

BbgkyConfig coupling(double lambda) {
    BbgkyConfig cfg;
    cfg.units.coupling_lambda = lambda;
    cfg.interaction = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0);
    return cfg;
}

double max_abs_diff(const WignerState& a, const WignerState& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double l2(const WignerState& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

double mean_p(const WignerState& f) { return moment(f, Polynomial::axis(1)); }

}  // namespace

TEST_CASE("without coupling the model is two independent one-electron runs") {
    const auto g = desk_grid();
    BbgkyConfig cfg = coupling(0.0);
    cfg.ext1 = wigner_kernel_1e(PotentialSpec::quadratic(0.2), g);
    SolverConfig1e sc;
    sc.dt = 0.01;
    CoupledState s{packet(g, -3.0, 0.5), packet(g, 3.0, -0.5), 0.0};
    const Propagator1e p1(g, FieldConfig{}, cfg.ext1, sc), p2(g, FieldConfig{}, PotentialKernel::zero(g), sc);
    WignerState a = s.f1, b = s.f2;
    BbgkyPropagator prop(g, cfg, sc);
    for (int k = 0; k < 20; ++k) {
        s = prop.step(s);
        a = p1.step(a);
        b = p2.step(b);
    }
    CHECK(max_abs_diff(s.f1, a) < 1e-10);
    CHECK(max_abs_diff(s.f2, b) < 1e-10);
    CHECK(separability_metric(s.pair_state()) < 1e-12);
}

TEST_CASE("mean-field forces balance and mass is kept") {
    const auto g = desk_grid();
    SolverConfig1e sc;
    sc.dt = 0.01;
    CoupledState s{packet(g, -3.0, 0.5), packet(g, 3.0, -0.5), 0.0};
    BbgkyConfig cfg = coupling(1.0);
    cfg.renormalize = false;
    BbgkyPropagator prop(g, cfg, sc);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double p0 = mean_p(s.f1) + mean_p(s.f2);
        s = prop.step(s);
        worst = std::max(worst, std::abs(mean_p(s.f1) + mean_p(s.f2) - p0));
        CHECK(std::abs(s.f1.integral() - 1.0) < 1e-6);
        CHECK(std::abs(s.f2.integral() - 1.0) < 1e-6);
    }
    CHECK(worst <= 1e-6);
    // the electrons repel
    CHECK(mean_p(s.f1) < 0.5 - 1e-3);

    const auto ev = evolve_bbgky(CoupledState{packet(g, -3.0, 0.5), packet(g, 3.0, -0.5), 0.0}, 0.5, coupling(1.0),
                                 sc, 10, {0.2});
    CHECK(ev.failure.empty());
    CHECK(ev.series.size() == 6);
    REQUIRE(ev.snapshots.size() == 1);
    CHECK(ev.snapshots[0].time == doctest::Approx(0.2));
    for (double n : ev.series.column("norm")) CHECK(std::abs(n - 1.0) < 1e-6);
    for (double n : ev.series.column("norm2")) CHECK(std::abs(n - 1.0) < 1e-6);
    for (double v : ev.series.column("separability")) CHECK(v == 0.0);
}

TEST_CASE("one step from a product is the partially averaged increment") {
    const auto g = WignerGrid::make(1, 24, -9.6, 9.6, 6.0, 24);
    const WignerState a = packet(g, -2.0, 0.5), b = packet(g, 2.0, -0.5);
    const BbgkyConfig cfg = coupling(1.0);
    const auto table = pair_kernel_table(cfg.units, cfg.interaction, g);
    const PotentialKernel r1 = reduced_kernel(b, *table), r2 = reduced_kernel(a, *table);
    const auto Kint = coulomb_kernel_2e(cfg.units, cfg.interaction, g);
    const WignerState prod = tensor_product(a, b);
    std::vector<double> res;
    for (double dt : {0.04, 0.02, 0.01}) {
        SolverConfig1e sc;
        sc.dt = dt;
        const CoupledState s = bbgky_step(CoupledState{a, b, 0.0}, cfg, sc);
        // the increment with the interaction replaced by its partner averages
        const WignerState mf = first_order_increment(a, b, dt, r1, r2, InteractionKernel{});
        res.push_back(l2(s.pair_state() - mf));
        // the difference to the full increment is the unaveraged remainder
        const WignerState full = first_order_increment(a, b, dt, PotentialKernel::zero(g), PotentialKernel::zero(g), Kint);
        WignerState rem = apply_kernel(Kint, prod);
        rem.axpy(-1.0, apply_kernel_to_electron(r1, prod, 1));
        rem.axpy(-1.0, apply_kernel_to_electron(r2, prod, 2));
        rem *= dt;
        WignerState adv;
        Advection2e(g, dt, Interpolation::spectral).apply(rem, adv);
        CHECK(max_abs_diff(full - mf, adv) < 1e-14);
        CHECK(l2(adv) > 0.0);
    }
    for (std::size_t k = 1; k < res.size(); ++k) {
        CHECK(res[k - 1] / res[k] >= 3.5);
        CHECK(res[k - 1] / res[k] <= 4.5);
    }
}

TEST_CASE("nonlinearity probe") {
    const auto g = desk_grid();
    SolverConfig1e sc;
    sc.dt = 0.01;
    const CoupledState s0{packet(g, -4.0, 0.5), packet(g, 4.0, -0.5), 0.0};
    CHECK(nonlinearity_probe(s0, 1.0, 2.0, coupling(0.0), sc).deviation <= 1e-10);
    CHECK(nonlinearity_probe(s0, 1.0, 1.0, coupling(1.0), sc).deviation == 0.0);
    const auto r = nonlinearity_probe(s0, 1.0, 2.0, coupling(1.0), sc);
    CHECK(r.deviation > 1e-3);
    CHECK(r.factor_deviation > 0.0);
    CHECK(r.partner_deviation > 1e-3);
    MESSAGE("pair deviation " << r.deviation << ", factor " << r.factor_deviation << ", partner " << r.partner_deviation);
}

TEST_CASE("refresh cadence converges") {
    const auto g = desk_grid();
    SolverConfig1e sc;
    sc.dt = 0.01;
    const CoupledState s0{packet(g, -3.0, 0.5), packet(g, 3.0, -0.5), 0.0};
    const auto d = refresh_convergence(s0, 0.5, coupling(1.0), sc, {1, 2, 5, 10});
    CHECK(d[0] == 0.0);
    CHECK(d[1] > 0.0);
    CHECK(d[1] < d[2]);
    CHECK(d[2] < d[3]);
    CHECK(d[3] < 1e-2);
}

TEST_CASE("coupled first iterate on a micro-grid") {
    const auto g = WignerGrid::make(1, 4, -4.0, 4.0, 2.0, 4);
    const WignerState a = packet(g, -0.5, 0.3, 0.8), b = packet(g, 0.5, -0.2, 0.8);
    UnitSystem on;
    on.coupling_lambda = 1.0;
    const auto spec = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0);

    const auto zero = coupled_first_iterate(a, b, 0.01, UnitSystem{}, spec);
    CHECK(l2(zero.first) == 0.0);
    CHECK(l2(zero.nested) == 0.0);

    const auto big = coupled_first_iterate(a, b, 1e-2, on, spec);
    const auto small = coupled_first_iterate(a, b, 5e-3, on, spec);
    CHECK(l2(big.first) / l2(small.first) == doctest::Approx(2.0).epsilon(0.05));
    // a kernel action carries no mass per position cell, so the partner
    // density only changes through streaming and the nested term is O(t^3)
    CHECK(l2(big.nested) / l2(small.nested) == doctest::Approx(8.0).epsilon(0.05));

    const WignerState direct = coupled_nested_term_direct(a, b, 0.3, on, spec, 4);
    const WignerState fast = coupled_first_iterate(a, b, 0.3, on, spec, 4).nested;
    CHECK(l2(fast) > 0.0);
    CHECK(max_abs_diff(direct, fast) <= 1e-12 * std::max(1.0, l2(fast)));

    // iterating the first equation alone gives a different second-order term
    const auto it = coupled_first_iterate(a, b, 0.3, on, spec, 4);
    CHECK(l2(it.iterated) > 0.0);
    CHECK(l2(it.iterated - it.nested) > 0.1 * l2(it.nested));

    const auto g8 = WignerGrid::make(1, 8, -8.0, 8.0, 4.0, 8);
    CHECK_THROWS_AS(coupled_first_iterate(packet(g8, 0, 0), packet(g8, 1, 0), 0.1, on, spec),
                    CostGuardError);
}
