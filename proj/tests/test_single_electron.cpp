#include <doctest.h>

#include <cmath>
#include <random>

#include "wigner2e/single_electron.hpp"

using namespace wigner2e;

namespace {

double dot(const WignerState& a, const WignerState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

WignerState random_state(const WignerGrid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> u(0.0, 1.0);
    WignerState f = WignerState::zeros(g, Arity::one);
    for (auto& v : f.values()) v = u(rng);
    return f;
}

}  // namespace

TEST_CASE("shift matrices conserve sums and compose") {
    for (auto m : {Interpolation::spectral, Interpolation::linear, Interpolation::cubic})
        for (int n : {8, 9, 16}) {
            const auto S = shift_matrix(n, 1.37, m);
            for (int j = 0; j < n; ++j) {
                double c = 0.0;
                for (int i = 0; i < n; ++i) c += S[std::size_t(j) * n + i];
                CHECK(c == doctest::Approx(1.0).epsilon(1e-13));
            }
        }
    // spectral shifts form a group: S(a) S(b) = S(a + b)
    const int n = 12;
    const auto A = shift_matrix(n, 0.3, Interpolation::spectral), B = shift_matrix(n, 2.45, Interpolation::spectral);
    const auto C = shift_matrix(n, 2.75, Interpolation::spectral);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += A[std::size_t(k) * n + i] * B[std::size_t(j) * n + k];
            worst = std::max(worst, std::abs(s - C[std::size_t(j) * n + i]));
        }
    CHECK(worst < 1e-13);
    // band-limited samples are translated exactly
    const double a = 0.61;
    const auto S = shift_matrix(n, a, Interpolation::spectral);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += S[std::size_t(j) * n + i] * std::cos(2 * kPi * 3 * j / n + 0.2);
        CHECK(s == doctest::Approx(std::cos(2 * kPi * 3 * (i - a) / n + 0.2)).epsilon(1e-12));
    }
    // interpolation at integer shifts is a permutation
    for (auto m : {Interpolation::linear, Interpolation::cubic}) {
        const auto P = shift_matrix(8, 2.0, m);
        for (int i = 0; i < 8; ++i) CHECK(P[std::size_t((i + 6) % 8) * 8 + i] == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(interpolation_from_string("quintic"), ValidationError);
}

TEST_CASE("free streaming follows the characteristics") {
    const auto g = WignerGrid::make(1, 64, -10.0, 10.0, 10.0, 64);
    const GaussianPacket pk{{-2.0}, {1.2}, {1.0}};
    const auto f0 = make_gaussian_state(pk, g);
    SolverConfig1e sc;
    sc.dt = 0.5;
    WignerState f = f0;
    for (int k = 0; k < 4; ++k) f = step_1e(f, {}, PotentialKernel::zero(g), sc);
    CHECK(moment(f, Polynomial::axis(0)) == doctest::Approx(-2.0 + 1.2 * 2.0).epsilon(1e-10));
    CHECK(std::abs(f.integral() - 1.0) < 1e-12);
    // closed form f0(x - P t, P), renormalized like the initial state
    WignerState ref = WignerState::zeros(g, Arity::one);
    for (int i = 0; i < g.n_x; ++i)
        for (int n = 0; n < g.n_p; ++n) {
            const double r[1] = {g.x(i) - g.p(n) * 2.0}, p[1] = {g.p(n)};
            ref[std::size_t(i) * g.n_p + n] = gaussian_wigner(pk, r, p);
        }
    ref *= 1.0 / ref.integral();
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(f[i] - ref[i]));
    CHECK(worst < 1e-8);
}

TEST_CASE("harmonic oscillator first moments over one period") {
    const auto g = WignerGrid::make(1, 64, -8.0, 8.0, 10.0, 64);
    const auto K = wigner_kernel_1e(PotentialSpec::quadratic(1.0), g);
    const auto f0 = make_gaussian_state({{1.0}, {0.0}, {std::sqrt(0.5)}}, g);
    SolverConfig1e sc;
    sc.dt = 0.01;
    const auto ev = evolve_1e(f0, 2 * kPi, {}, K, sc, 10);
    const auto t = ev.series.column("t"), x = ev.series.column("mean_x"), P = ev.series.column("mean_Px");
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        worst = std::max(worst, std::abs(x[k] - std::cos(t[k])));
        worst = std::max(worst, std::abs(P[k] + std::sin(t[k])));
    }
    CHECK(worst < 1e-3);
    for (double nrm : ev.series.column("norm")) CHECK(std::abs(nrm - 1.0) < 1e-10);
    // pure state stays pure under quadratic dynamics
    CHECK(ev.series.back().purity1 == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("strang splitting is second order") {
    const auto g = WignerGrid::make(1, 48, -10.0, 10.0, 10.0, 48);
    const auto K = wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0, {0.0}), g);
    const auto f0 = make_gaussian_state({{-2.5}, {1.0}, {1.0}}, g);
    auto run = [&](double dt) {
        SolverConfig1e sc;
        sc.dt = dt;
        return evolve_1e(f0, 0.8, {}, K, sc, 1000).final_state;
    };
    const auto a = run(0.1), b = run(0.05), c = run(0.025);
    const double ratio = model_distance(a, b) / model_distance(b, c);
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
    SolverConfig1e lie;
    lie.splitting = Splitting::lie;
    lie.dt = 0.05;
    const auto l1 = evolve_1e(f0, 0.8, {}, K, lie, 1000).final_state;
    lie.dt = 0.025;
    const auto l2 = evolve_1e(f0, 0.8, {}, K, lie, 1000).final_state;
    CHECK(model_distance(l1, c) / model_distance(l2, c) > 1.6);
}

TEST_CASE("normalization per step") {
    const auto g = WignerGrid::make(1, 32, -8.0, 8.0, 8.0, 32);
    const auto K = wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 2.0, 0.5, {0.5}), g);
    WignerState f = make_gaussian_state({{-1.0}, {0.5}, {0.8}}, g);
    SolverConfig1e sc;
    sc.dt = 0.02;
    Propagator1e prop(g, {}, K, sc);
    for (int k = 0; k < 50; ++k) {
        const double before = f.integral();
        StepReport1e rep;
        f = prop.step(f, &rep);
        CHECK(std::abs(f.integral() - before) < 1e-8);
        CHECK(rep.wrapped >= 0.0);
    }
}

TEST_CASE("kernel propagator is the exact exponential") {
    for (int d : {1, 2}) {
        const auto g = d == 1 ? WignerGrid::make(1, 8, -4.0, 4.0, 6.0, 16) : WignerGrid::make(2, 4, -4.0, 4.0, 6.0, 8);
        const auto spec = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 0.7, std::vector<double>(d, 0.3));
        const auto K = wigner_kernel_1e(spec, g);
        const auto f = random_state(g, 5 + d);
        auto err = [&](double h) {
            WignerState e;
            KernelPropagator(K, h).apply(f, e);
            auto Kf = apply_kernel(K, f);
            auto K2f = apply_kernel(K, Kf);
            WignerState taylor = f;
            taylor.axpy(h, Kf);
            taylor.axpy(0.5 * h * h, K2f);
            return (e - taylor).l2_norm();
        };
        // third-order remainder of the Taylor polynomial
        const double r = err(0.02) / err(0.01);
        CHECK(r > 7.0);
        CHECK(r < 9.0);
        WignerState a, b, c;
        KernelPropagator P(K, 0.3), P2(K, 0.6);
        P.apply(f, a);
        P.apply(a, b);
        P2.apply(f, c);
        CHECK((b - c).l2_norm() < 1e-11 * f.l2_norm());
        CHECK(a.l2_norm() == doctest::Approx(f.l2_norm()).epsilon(1e-12));
        double sa = 0.0, sf = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            sa += a[i];
            sf += f[i];
        }
        CHECK(std::abs(sa - sf) < 1e-11);
    }
}

TEST_CASE("magnetic rotation and speed conservation") {
    const auto g = WignerGrid::make(2, 20, -8.0, 8.0, 12.0, 32);
    FieldConfig cfg;
    cfg.B0 = 1.0;
    const GaussianPacket pk{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}};
    const auto f0 = make_gaussian_state(pk, g);
    SolverConfig1e sc;
    sc.dt = 0.05;
    const auto ev = evolve_1e(f0, 0.5 * kPi, cfg, PotentialKernel::zero(g), sc, 5);
    const auto P2 = ev.series.column("mean_P2");
    for (double v : P2) CHECK(std::abs(v - P2.front()) < 1e-6);
    // after a quarter period P = (1, 0) has turned to (0, -1), r to (1, -1)
    const auto& last = ev.series.back();
    CHECK(std::abs(last.extra[1]) < 1e-3);
    CHECK(std::abs(last.extra[3] + 1.0) < 1e-3);
    CHECK(std::abs(last.extra[0] - 1.0) < 1e-3);
    CHECK(std::abs(last.extra[2] + 1.0) < 1e-3);
    for (double nrm : ev.series.column("norm")) CHECK(std::abs(nrm - 1.0) < 1e-10);
    CHECK_THROWS_AS(Advection1e(WignerGrid::make(1, 8, -1, 1, 1, 8), cfg, 0.1, Interpolation::spectral),
                    ValidationError);
}

TEST_CASE("B1 operator") {
    const auto g = WignerGrid::make(2, 10, -5.0, 5.0, 4.0, 10);
    const double B1 = 0.7;
    const double kappa = B1 / 12.0;
    // central differences are exact on x Py^2 + Px Py y away from the seams
    WignerState f = WignerState::zeros(g, Arity::one);
    std::vector<double> z(4);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.coordinates(i, z);
        f[i] = z[0] * z[3] * z[3] + z[2] * z[3] * z[1];
    }
    const auto Bf = apply_b1_term(f, B1);
    const int n = g.n_x, q = g.n_p;
    for (int ix = 2; ix < n - 2; ++ix)
        for (int iy = 2; iy < n - 2; ++iy)
            for (int px = 2; px < q - 2; ++px)
                for (int py = 2; py < q - 2; ++py)
                    CHECK(Bf[((std::size_t(ix) * n + iy) * q + px) * q + py] ==
                          doctest::Approx(kappa * (2.0 - 1.0)).epsilon(1e-9));
    const auto a = random_state(g, 1), b = random_state(g, 2);
    CHECK(std::abs(dot(a, apply_b1_term(b, B1)) + dot(apply_b1_term(a, B1), b)) < 1e-9);
    double s = 0.0;
    const auto Ba = apply_b1_term(a, B1);
    for (double v : Ba.values()) s += v;
    CHECK(std::abs(s) < 1e-9);
    CHECK(apply_b1_term(make_gaussian_state({{0.0}, {0.0}, {1.0}}, WignerGrid::make(1, 16, -8, 8, 8, 16)), B1)
              .l2_norm() == 0.0);
    FieldConfig cfg;
    cfg.B1 = 50.0;
    SolverConfig1e sc;
    sc.dt = 0.5;
    CHECK_THROWS_AS(Propagator1e(g, cfg, PotentialKernel::zero(g), sc), NumericalGuardError);
    sc.dt = 0.5 * b1_step_limit(g, cfg.B1, sc.b1_guard);
    CHECK_NOTHROW(Propagator1e(g, cfg, PotentialKernel::zero(g), sc));
}

TEST_CASE("B1 run conserves normalization") {
    const auto g = WignerGrid::make(2, 20, -8.0, 8.0, 6.0, 12);
    FieldConfig cfg;
    cfg.B0 = 0.5;
    cfg.B1 = 0.2;
    SolverConfig1e sc;
    sc.dt = 0.02;
    const auto f0 = make_gaussian_state({{0.0, 0.0}, {0.4, 0.0}, {1.0, 1.0}}, g);
    const auto ev = evolve_1e(f0, 0.4, cfg, PotentialKernel::zero(g), sc, 5);
    for (double nrm : ev.series.column("norm")) CHECK(std::abs(nrm - 1.0) < 1e-10);
}

TEST_CASE("edge mass is a domain error") {
    const auto g = WignerGrid::make(1, 32, -6.0, 6.0, 8.0, 32);
    const auto f0 = make_gaussian_state({{2.0}, {2.0}, {0.7}}, g);
    SolverConfig1e sc;
    sc.dt = 0.05;
    CHECK_THROWS_AS(evolve_1e(f0, 3.0, {}, PotentialKernel::zero(g), sc), DomainError);
    sc.dt = -1.0;
    CHECK_THROWS_AS(sc.validate(), ValidationError);
}

TEST_CASE("neumann series") {
    const auto g = WignerGrid::make(1, 32, -8.0, 8.0, 6.0, 16);
    const auto K = wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0, {0.0}), g);
    const auto f0 = make_gaussian_state({{-1.5}, {0.5}, {1.0}}, g);
    SUBCASE("order 0 without a kernel is advection") {
        const auto a = neumann_solve_1e(f0, 0.7, 0, {}, PotentialKernel::zero(g));
        const auto b = Advection1e(g, {}, 0.7, Interpolation::spectral).apply(f0);
        CHECK(model_distance(a, b) == 0.0);
        CHECK(model_distance(neumann_solve_1e(f0, 0.7, 2, {}, PotentialKernel::zero(g)), b) < 1e-15);
    }
    SUBCASE("order 1 at small t is the first increment") {
        auto resid = [&](double t) {
            WignerState inc = f0;
            inc.axpy(t, apply_kernel(K, f0));
            const auto adv = Advection1e(g, {}, t, Interpolation::spectral).apply(inc);
            return model_distance(neumann_solve_1e(f0, t, 1, {}, K), adv);
        };
        const double r = resid(0.02) / resid(0.01);
        CHECK(r > 3.5);
        CHECK(r < 4.5);
    }
    SUBCASE("order 2 against the grid solver") {
        SolverConfig1e sc;
        sc.dt = 1e-3;
        const auto grid = evolve_1e(f0, 0.1, {}, K, sc, 1000).final_state;
        const auto neu = neumann_solve_1e(f0, 0.1, 2, {}, K);
        CHECK(model_distance(grid, neu) < 1e-2 * grid.l2_norm());
        CHECK(model_distance(grid, neu) < model_distance(grid, neumann_solve_1e(f0, 0.1, 1, {}, K)));
    }
    CHECK_THROWS_AS(neumann_solve_1e(f0, 0.1, 4, {}, K), CostGuardError);
    CHECK_THROWS_AS(neumann_solve_1e(make_gaussian_state({{0.0}, {0.0}, {1.0}}, WignerGrid::make(1, 256, -8, 8, 8, 256)),
                                     0.1, 3, {}, PotentialKernel::zero(WignerGrid::make(1, 256, -8, 8, 8, 256))),
                    CostGuardError);
}
