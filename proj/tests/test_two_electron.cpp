#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "wigner2e/two_electron.hpp"

using namespace wigner2e;

namespace {

WignerGrid micro_grid(int n = 24) { return WignerGrid::make(1, n, -9.6, 9.6, 6.0, n); }

WignerState packet(const WignerGrid& g, double x0, double p0, double sigma = 1.0) {
    return make_gaussian_state(GaussianPacket{{x0}, {p0}, {sigma}}, g);
}

InteractionKernel interaction(const WignerGrid& g, double lambda) {
    UnitSystem u;
    u.coupling_lambda = lambda;
    return coulomb_kernel_2e(u, PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0), g);
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

double total_momentum(const WignerState& f) {
    const Polynomial P = Polynomial::axis(1);
    return moment(marginal(f, 1), P) + moment(marginal(f, 2), P);
}

}  // namespace

TEST_CASE("without interaction a step is the tensor product of one-electron steps") {
    const auto g = micro_grid();
    const auto K1 = wigner_kernel_1e(PotentialSpec::quadratic(0.5), g);
    const auto K2 = wigner_kernel_1e(PotentialSpec::linear(0.3), g);
    const auto Kint = interaction(g, 0.0);
    REQUIRE(Kint.is_zero());
    SolverConfig2e sc;
    sc.dt = 0.02;
    SolverConfig1e s1;
    s1.dt = sc.dt;
    const Propagator2e prop(g, {K1, K2, Kint}, sc);
    const Propagator1e p1(g, FieldConfig{}, K1, s1), p2(g, FieldConfig{}, K2, s1);
    WignerState a = packet(g, -1.0, 0.5), b = packet(g, 1.5, -0.4);
    WignerState f = tensor_product(a, b);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        f = prop.step(f);
        a = p1.step(a);
        b = p2.step(b);
        worst = std::max(worst, max_abs_diff(f, tensor_product(a, b)));
    }
    CHECK(worst < 1e-10);
    CHECK(step_2e(tensor_product(a, b), K1, K2, Kint, sc).integral() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("interaction step conserves mass and total momentum") {
    const auto g = micro_grid();
    const auto Kint = interaction(g, 1.0);
    SolverConfig2e sc;
    sc.dt = 0.05;
    const Propagator2e prop(g, {PotentialKernel::zero(g), PotentialKernel::zero(g), Kint}, sc);
    WignerState f = tensor_product(packet(g, -1.5, 0.6), packet(g, 1.5, -0.2));
    for (int k = 0; k < 10; ++k) {
        const double n0 = f.integral(), p0 = total_momentum(f);
        StepReport2e rep;
        const WignerState h = prop.step(f, &rep);
        CHECK(std::abs(h.integral() - n0) < 1e-10);
        CHECK(std::abs(total_momentum(h) - p0) < 1e-8);
        CHECK(rep.wrapped >= 0.0);
        f = h;
    }
    const WignerState m1 = marginal(f, 1), m2 = marginal(f, 2);
    CHECK(std::abs(m1.integral() - 1.0) < 1e-8);
    CHECK(std::abs(m2.integral() - 1.0) < 1e-8);
}

TEST_CASE("interaction exponential is orthogonal and generated by the kernel") {
    const auto g = micro_grid();
    const auto Kint = interaction(g, 1.0);
    const WignerState f = tensor_product(packet(g, -1.0, 0.3), packet(g, 1.0, -0.3));
    const WignerState Gf = apply_kernel(Kint, f);
    double prev = 0.0;
    for (double h : {0.02, 0.01}) {
        WignerState e;
        InteractionPropagator(Kint, h).apply(f, e);
        CHECK(l2(e) == doctest::Approx(l2(f)).epsilon(1e-12));
        WignerState r = e;
        r.axpy(-1.0, f);
        r.axpy(-h, Gf);
        const double res = l2(r);
        if (prev > 0.0) CHECK(prev / res == doctest::Approx(4.0).epsilon(0.1));
        prev = res;
    }
    WignerState same;
    InteractionPropagator(Kint, 0.0).apply(f, same);
    CHECK(max_abs_diff(same, f) == 0.0);
}

TEST_CASE("first-order increment") {
    const auto g = micro_grid();
    const auto Kint = interaction(g, 1.0);
    const auto K1 = wigner_kernel_1e(PotentialSpec::quadratic(0.3), g);
    const auto Z = PotentialKernel::zero(g);
    const WignerState a = packet(g, -1.5, 0.5), b = packet(g, 1.5, -0.5);
    const WignerState prod = tensor_product(a, b);

    SUBCASE("zero step is the product") {
        CHECK(max_abs_diff(first_order_increment(a, b, 0.0, K1, K1, Kint), prod) == 0.0);
    }
    SUBCASE("halving the step shrinks the residual against step_2e by four") {
        std::vector<double> res;
        for (double dt : {0.04, 0.02, 0.01}) {
            SolverConfig2e sc;
            sc.dt = dt;
            const WignerState s = step_2e(prod, K1, K1, Kint, sc);
            const WignerState i = first_order_increment(a, b, dt, K1, K1, Kint);
            res.push_back(l2(s - i));
        }
        for (std::size_t k = 1; k < res.size(); ++k) {
            const double ratio = res[k - 1] / res[k];
            CHECK(ratio >= 3.5);
            CHECK(ratio <= 4.5);
        }
    }
    SUBCASE("without interaction it is the expanded product of one-electron updates") {
        const auto K2 = wigner_kernel_1e(PotentialSpec::linear(0.2), g);
        const double dt = 0.01;
        const WignerState inc = first_order_increment(a, b, dt, K1, K2, interaction(g, 0.0));
        WignerState a1 = a, b1 = b;
        const WignerState ka = apply_kernel(K1, a), kb = apply_kernel(K2, b);
        a1.axpy(dt, ka);
        b1.axpy(dt, kb);
        WignerState expect = tensor_product(a1, b1);
        expect.axpy(-dt * dt, tensor_product(ka, kb));
        WignerState adv;
        Advection2e(g, dt, Interpolation::spectral).apply(expect, adv);
        CHECK(max_abs_diff(inc, adv) < 1e-13);
    }
    SUBCASE("entanglement comes from the interaction term only") {
        const double dt = 1e-3;
        const WignerState with = first_order_increment(a, b, dt, Z, Z, Kint);
        const WignerState without = first_order_increment(a, b, dt, Z, Z, interaction(g, 0.0));
        CHECK(separability_metric(without) < 1e-12);
        CHECK(separability_metric(with) > 1e-6);
        WignerState term;
        WignerState g0 = apply_kernel(Kint, prod);
        g0 *= dt;
        Advection2e(g, dt, Interpolation::spectral).apply(g0, term);
        CHECK(max_abs_diff(with - without, term) < 1e-15);
    }
}

TEST_CASE("evolve_2e diagnostics") {
    const auto g = micro_grid();
    const WignerState f0 = tensor_product(packet(g, -2.0, 0.5), packet(g, 2.0, -0.5));
    const auto Z = PotentialKernel::zero(g);
    SolverConfig2e sc;
    sc.dt = 0.01;

    SUBCASE("no interaction stays separable") {
        const auto ev = evolve_2e(f0, 0.5, {Z, Z, interaction(g, 0.0)}, sc, 5);
        for (double s : ev.series.column("separability")) CHECK(s <= 1e-10);
        CHECK(ev.failure.empty());
    }
    SUBCASE("interaction builds correlations during the approach") {
        const auto ev = evolve_2e(f0, 1.0, {Z, Z, interaction(g, 1.0)}, sc, 10, {0.5});
        const auto sep = ev.series.column("separability");
        REQUIRE(sep.size() == 11);
        for (std::size_t k = 1; k < sep.size(); ++k) CHECK(sep[k] > sep[k - 1]);
        for (double n : ev.series.column("norm")) CHECK(std::abs(n - 1.0) < 1e-6);
        for (double p : ev.series.column("total_P")) CHECK(std::abs(p) < 1e-8);
        REQUIRE(ev.snapshots.size() == 1);
        CHECK(ev.snapshots[0].time() == doctest::Approx(0.5));
        CHECK(ev.final_state.time() == doctest::Approx(1.0));
        // merged half advections give the same result as plain steps
        const auto every = evolve_2e(f0, 1.0, {Z, Z, interaction(g, 1.0)}, sc, 1);
        CHECK(max_abs_diff(every.final_state, ev.final_state) < 1e-12);
        WignerState f = f0;
        const Propagator2e prop(g, {Z, Z, interaction(g, 1.0)}, sc);
        for (int k = 0; k < 100; ++k) f = prop.step(f);
        CHECK(max_abs_diff(f, ev.final_state) < 1e-12);
    }
    SUBCASE("linear interpolation runs unmerged") {
        SolverConfig2e lin = sc;
        lin.interpolation = Interpolation::linear;
        const auto ev = evolve_2e(f0, 0.1, {Z, Z, interaction(g, 1.0)}, lin, 5);
        CHECK(ev.series.size() == 3);
        CHECK(std::abs(ev.final_state.integral() - 1.0) < 1e-10);
    }
}

TEST_CASE("two-electron cost guard") {
    const auto g = WignerGrid::make(1, 40, -10, 10, 10, 40);
    SolverConfig2e sc;
    sc.max_cells = 1'000'000;
    CHECK_THROWS_AS(check_cost_2e(g, sc), CostGuardError);
    sc.max_cells = 40 * 40 * 40 * 40;
    CHECK_NOTHROW(check_cost_2e(g, sc));
    ::setenv("WIGNER2E_MAX_CELLS", "1000", 1);
    CHECK(default_max_cells() == 1000);
    ::setenv("WIGNER2E_MAX_CELLS", "abc", 1);
    CHECK_THROWS_AS(default_max_cells(), ValidationError);
    ::unsetenv("WIGNER2E_MAX_CELLS");
    CHECK(default_max_cells() == 16'777'216);
    CHECK_THROWS_AS(check_cost_2e(WignerGrid::make(2, 8, -4, 4, 4, 8), SolverConfig2e{}), ValidationError);
}
