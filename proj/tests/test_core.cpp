#include <doctest.h>

#include <cmath>
#include <random>

#include "wigner2e/core.hpp"

using namespace wigner2e;

namespace {

WignerGrid wide_grid(int n = 48) { return WignerGrid::make(1, n, -10.0, 10.0, 12.0, n); }

GaussianPacket packet1d(double x0, double p0, double s) { return {{x0}, {p0}, {s}}; }

}  // namespace

TEST_CASE("grid geometry") {
    const auto g = WignerGrid::make(1, 8, -2.0, 2.0, kPi, 6);
    CHECK(g.dx() == doctest::Approx(0.5));
    CHECK(g.dp() == doctest::Approx(1.0));
    CHECK(g.x(0) == doctest::Approx(-1.75));
    CHECK(g.p(0) == doctest::Approx(-2.5));
    CHECK(g.p(5) == doctest::Approx(2.5));
    CHECK(g.p(2) + g.p(3) == doctest::Approx(0.0));
    CHECK_THROWS_AS(WignerGrid::make(1, 3, -1, 1, 1, 4), ValidationError);
    CHECK_THROWS_AS(WignerGrid::make(1, 8, -1, 1, 1, 5), ValidationError);
    CHECK_THROWS_AS(WignerGrid::make(3, 8, -1, 1, 1, 4), ValidationError);
    CHECK_THROWS_AS(WignerGrid::make(1, 8, 1, -1, 1, 4), ValidationError);
}

TEST_CASE("gaussian state normalization and centre value") {
    const auto g = wide_grid();
    const auto f = make_gaussian_state(packet1d(0, 0, 1), g);
    CHECK(std::abs(f.integral() - 1.0) < 1e-9);
    const double r0[1] = {0.0}, p0[1] = {0.0};
    CHECK(gaussian_wigner(packet1d(0, 0, 1), r0, p0) == doctest::Approx(1.0 / kPi).epsilon(1e-15));
    // the grid samples agree with the closed form (renormalization is ~1)
    double worst = 0.0;
    for (int i = 0; i < g.n_x; ++i)
        for (int n = 0; n < g.n_p; ++n) {
            const double r[1] = {g.x(i)}, p[1] = {g.p(n)};
            worst = std::max(worst, std::abs(f[i * g.n_p + n] - gaussian_wigner(packet1d(0, 0, 1), r, p)));
        }
    CHECK(worst < 1e-9);
}

TEST_CASE("gaussian momentum moment by independent quadrature") {
    const auto g = WignerGrid::make(1, 64, -6.0, 6.0, 10.0, 64);
    const auto f = make_gaussian_state(packet1d(0, 2, 0.7), g);
    const double pm = moment(f, Polynomial::axis(momentum_axis(1, Arity::one, 1)));
    CHECK(std::abs(pm - 2.0) < 1e-6);
    // oracle: direct 1D quadrature of the closed form in p alone
    double num = 0.0, den = 0.0;
    const double sp = 1.0 / (2 * 0.7);
    for (int k = -4000; k <= 4000; ++k) {
        const double p = 2.0 + k * 1e-3;
        const double w = std::exp(-0.5 * (p - 2.0) * (p - 2.0) / (sp * sp));
        num += p * w;
        den += w;
    }
    CHECK(std::abs(pm - num / den) < 1e-6);
}

TEST_CASE("gaussian mean momentum and nonnegativity") {
    const auto g = WignerGrid::make(1, 48, -8.0, 8.0, 16.0, 48);
    const auto f = make_gaussian_state(packet1d(0.5, 1.5, 1.0), g);
    CHECK(std::abs(moment(f, Polynomial::axis(1)) - 1.5) < 1e-6);
    CHECK(std::abs(moment(f, Polynomial::constant(1.0)) - 1.0) < 1e-14);
    for (double v : f.values()) CHECK(v >= 0.0);
}

TEST_CASE("gaussian construction errors") {
    const auto g = wide_grid();
    CHECK_THROWS_AS(make_gaussian_state(packet1d(0, 0, 0.0), g), ValidationError);
    CHECK_THROWS_AS(make_gaussian_state(packet1d(0, 0, -1.0), g), ValidationError);
    CHECK_THROWS_AS(make_gaussian_state(packet1d(8.0, 0, 1.0), g), DomainError);
    CHECK_THROWS_AS(make_gaussian_state(packet1d(0, 6.0, 1.0), g), DomainError);
}

TEST_CASE("tensor product and marginals round trip over random pairs") {
    const auto g = WignerGrid::make(1, 16, -8.0, 8.0, 10.0, 16);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> xr(-2.5, 2.5), pr(-0.5, 0.5), sr(0.8, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f1 = make_gaussian_state(packet1d(xr(rng), pr(rng), sr(rng)), g);
        const auto f2 = make_gaussian_state(packet1d(xr(rng), pr(rng), sr(rng)), g);
        const auto f = tensor_product(f1, f2);
        CHECK(std::abs(f.integral() - 1.0) < 1e-9);
        const auto m1 = marginal(f, 1), m2 = marginal(f, 2);
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t i = 0; i < f1.size(); ++i) {
            e1 = std::max(e1, std::abs(m1[i] - f1[i]));
            e2 = std::max(e2, std::abs(m2[i] - f2[i]));
        }
        CHECK(e1 < 1e-13);
        CHECK(e2 < 1e-13);
        CHECK(std::abs(m1.integral() - f.integral()) < 1e-10);
    }
}

TEST_CASE("tensor product of d=2 states") {
    const auto g = WignerGrid::make(2, 8, -6.0, 6.0, 4.0, 8);
    const GaussianPacket a{{-1.0, 0.5}, {0.2, 0.0}, {1.0, 1.0}};
    const GaussianPacket b{{1.0, -0.5}, {-0.2, 0.1}, {1.0, 1.2}};
    const auto f1 = make_gaussian_state(a, g), f2 = make_gaussian_state(b, g);
    const auto f = tensor_product(f1, f2);
    CHECK(f.axis_count() == 8);
    CHECK(std::abs(f.integral() - 1.0) < 1e-9);
    const auto m2 = marginal(f, 2);
    for (std::size_t i = 0; i < f2.size(); ++i) CHECK(m2[i] == doctest::Approx(f2[i]).epsilon(1e-12));
    CHECK_THROWS_AS(tensor_product(f1, make_gaussian_state(packet1d(0, 0, 1), wide_grid())), ValidationError);
    CHECK_THROWS_AS(marginal(f1, 1), ValidationError);
}

TEST_CASE("marginal matches nested-loop summation of a random array") {
    const auto g = WignerGrid::make(1, 5, -3.0, 3.0, 4.0, 4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = g.n_x, q = g.n_p;
    std::vector<double> v(std::size_t(n) * n * q * q);
    for (auto& x : v) x = u(rng);
    WignerState f(g, Arity::two, v);
    f *= 1.0 / f.integral();
    const auto m1 = marginal(f, 1), m2 = marginal(f, 2);
    const double vol = g.dx() * g.dp();
    for (int i1 = 0; i1 < n; ++i1)
        for (int p1 = 0; p1 < q; ++p1) {
            double s = 0.0;
            for (int i2 = 0; i2 < n; ++i2)
                for (int p2 = 0; p2 < q; ++p2) s += f[((i1 * n + i2) * q + p1) * q + p2];
            CHECK(m1[i1 * q + p1] == doctest::Approx(s * vol).epsilon(1e-13));
        }
    for (int i2 = 0; i2 < n; ++i2)
        for (int p2 = 0; p2 < q; ++p2) {
            double s = 0.0;
            for (int i1 = 0; i1 < n; ++i1)
                for (int p1 = 0; p1 < q; ++p1) s += f[((i1 * n + i2) * q + p1) * q + p2];
            CHECK(m2[i2 * q + p2] == doctest::Approx(s * vol).epsilon(1e-13));
        }
    CHECK(std::abs(m1.integral() - 1.0) < 1e-10);
    CHECK(std::abs(m2.integral() - 1.0) < 1e-10);
}

TEST_CASE("narrow second factor: marginal recovers the first") {
    const auto g = WignerGrid::make(1, 32, -8.0, 8.0, 10.0, 32);
    const auto f1 = make_gaussian_state(packet1d(-1.0, 0.3, 1.0), g);
    const auto f2 = make_gaussian_state(packet1d(2.0, 0.0, 0.6), g);
    const auto m = marginal(tensor_product(f1, f2), 1);
    for (std::size_t i = 0; i < f1.size(); ++i) CHECK(m[i] == doctest::Approx(f1[i]).epsilon(1e-12));
}

TEST_CASE("moments of products") {
    const auto g = WignerGrid::make(1, 24, -8.0, 8.0, 12.0, 24);
    const auto f = tensor_product(make_gaussian_state(packet1d(-2.0, 0.0, 1.0), g),
                                  make_gaussian_state(packet1d(2.0, 0.0, 0.9), g));
    const auto P1 = Polynomial::axis(momentum_axis(1, Arity::two, 1));
    const auto P2 = Polynomial::axis(momentum_axis(1, Arity::two, 2));
    CHECK(std::abs(moment(f, P1 + P2)) < 1e-8);
    CHECK(moment(f, Polynomial::axis(position_axis(1, Arity::two, 2))) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK_THROWS_AS(moment(f, P1 * P1 * P1 * P1 * P1), ValidationError);
}

TEST_CASE("phase-space gaussian and mixtures") {
    const auto g = wide_grid();
    const double c[1] = {0.0}, p[1] = {0.0}, sr[1] = {2.0}, sp[1] = {0.5};
    const auto f = make_phase_space_gaussian(c, p, sr, sp, g);
    CHECK(std::abs(f.integral() - 1.0) < 1e-12);
    const double bad[1] = {0.1};
    CHECK_THROWS_AS(make_phase_space_gaussian(c, p, sr, bad, g), ValidationError);
    std::vector<WignerState> states{make_gaussian_state(packet1d(-4, 0, 1), g), make_gaussian_state(packet1d(4, 0, 1), g)};
    const double w[2] = {0.5, 0.5};
    CHECK(std::abs(mixture(states, w).integral() - 1.0) < 1e-12);
    const double wbad[2] = {0.7, 0.7};
    CHECK_THROWS_AS(mixture(states, wbad), ValidationError);
}
