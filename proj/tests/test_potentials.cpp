#include <doctest.h>

#include <cmath>
#include <random>

#include "wigner2e/potentials.hpp"

using namespace wigner2e;

namespace {

GaussianPacket packet1d(double x0, double p0, double s) { return {{x0}, {p0}, {s}}; }

// Relative L2 error of K f against c(x) * df/dP for a Gaussian packet,
// whose momentum derivative is -(P - p0) / sigma_p^2 * f.
template <class Coef>
double force_term_error(const PotentialSpec& spec, const WignerGrid& g, const GaussianPacket& pk, Coef coef) {
    const auto f = make_gaussian_state(pk, g);
    const auto inc = apply_kernel(wigner_kernel_1e(spec, g), f);
    const double sp = pk.sigma_p(0);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < g.n_x; ++i)
        for (int n = 0; n < g.n_p; ++n) {
            const double dfdp = -(g.p(n) - pk.center_p[0]) / (sp * sp) * f[i * g.n_p + n];
            const double ref = coef(g.x(i)) * dfdp;
            num += std::pow(inc[i * g.n_p + n] - ref, 2);
            den += ref * ref;
        }
    return std::sqrt(num / den);
}

// Independent transfer-by-transfer oracle: every transfer lands at its
// destination taken modulo the window.
WignerState brute_force_apply(const PotentialKernel& K, const WignerState& f) {
    const auto& g = f.grid();
    const int np = g.n_p;
    WignerState out = WignerState::zeros(g, Arity::one);
    for (int i = 0; i < g.n_x; ++i)
        for (int src = 0; src < np; ++src)
            for (int m = -(np - 1); m <= np - 1; ++m) {
                const int dst = (src + m + 2 * np) % np;
                out[i * np + dst] += g.dp() * K.value(i, m) * f[i * np + src];
            }
    return out;
}

double dot(const WignerState& a, const WignerState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

WignerState random_state(const WignerGrid& g, Arity a, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.2, 1.0);
    WignerState f = WignerState::zeros(g, a);
    for (auto& v : f.values()) v = u(rng);
    f *= 1.0 / f.integral();
    return f;
}

}  // namespace

TEST_CASE("kind none gives the zero kernel") {
    const auto g = WignerGrid::make(1, 16, -5, 5, 8, 16);
    const auto K = wigner_kernel_1e(PotentialSpec::none(), g);
    CHECK(K.is_zero());
    CHECK(K.max_abs() == 0.0);
    const auto f = make_gaussian_state(packet1d(0, 0, 1), g);
    const auto inc = apply_kernel(K, f);
    for (double v : inc.values()) CHECK(v == 0.0);
}

TEST_CASE("kernels are exactly antisymmetric in the transfer") {
    const auto g = WignerGrid::make(1, 12, -6, 6, 9, 12);
    std::vector<PotentialSpec> specs{PotentialSpec::linear(0.7), PotentialSpec::quadratic(1.3),
                                     PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 0.5, {0.3}),
                                     PotentialSpec::coulomb(PotentialKind::coulomb2d, 1.0, 0.5, {-0.2})};
    for (const auto& s : specs) {
        const auto K = wigner_kernel_1e(s, g);
        for (std::size_t r = 0; r < g.position_cells(); ++r)
            for (int m = 0; m < g.n_p; ++m) CHECK(K.value(r, m) == -K.value(r, -m));
    }
    const auto g2 = WignerGrid::make(2, 6, -4, 4, 6, 6);
    const auto K2 = wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 0.5, {0.2, -0.1}), g2);
    for (std::size_t r = 0; r < g2.position_cells(); ++r)
        for (int mx = -5; mx <= 5; ++mx)
            for (int my = -5; my <= 5; ++my) CHECK(K2.value(r, mx, my) == -K2.value(r, -mx, -my));
}

TEST_CASE("linear potential acts as the classical force term") {
    // dV/dx = alpha, so the kernel term approaches +alpha * df/dP
    const double alpha = 0.6;
    double prev = 1e9;
    for (int np : {32, 64, 128}) {
        // refine dp at a fixed momentum window
        const auto g = WignerGrid::make(1, 20, -6, 6, 4.0 * kPi * np / 32.0, np);
        const double err =
            force_term_error(PotentialSpec::linear(alpha), g, packet1d(0, 0.2, 1.0), [&](double) { return alpha; });
        CHECK(err < 0.05);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("quadratic potential acts as k x df/dP") {
    const double k = 1.5;
    const auto g = WignerGrid::make(1, 32, -6, 6, 16, 64);
    const double err =
        force_term_error(PotentialSpec::quadratic(k), g, packet1d(0.5, -0.3, 1.0), [&](double x) { return k * x; });
    CHECK(err < 1e-3);
}

TEST_CASE("quadratic kernel in d=2 splits per axis") {
    const double k = 0.8;
    const auto g = WignerGrid::make(2, 8, -5, 5, 16, 32);
    const GaussianPacket pk{{0.3, -0.4}, {0.2, 0.1}, {1.0, 1.0}};
    const auto f = make_gaussian_state(pk, g);
    const auto inc = apply_kernel(wigner_kernel_1e(PotentialSpec::quadratic(k), g), f);
    const int n = g.n_x, np = g.n_p;
    const double sp = pk.sigma_p(0);
    auto at = [&](int ix, int iy, int px, int py) { return f[(std::size_t(ix) * n + iy) * np * np + std::size_t(px) * np + py]; };
    double num = 0.0, den = 0.0;
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy)
            for (int px = 0; px < np; ++px)
                for (int py = 0; py < np; ++py) {
                    const double dx = -(g.p(px) - pk.center_p[0]) / (sp * sp) * at(ix, iy, px, py);
                    const double dy = -(g.p(py) - pk.center_p[1]) / (sp * sp) * at(ix, iy, px, py);
                    const double ref = k * (g.x(ix) * dx + g.x(iy) * dy);
                    const double v = inc[(std::size_t(ix) * n + iy) * np * np + std::size_t(px) * np + py];
                    num += (v - ref) * (v - ref);
                    den += ref * ref;
                }
    CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("apply_kernel conserves the integral and matches a transfer oracle") {
    const auto g = WignerGrid::make(1, 8, -4, 4, 6, 8);
    const auto K = wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.3, 0.4, {0.1}), g);
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto f = random_state(g, Arity::one, seed);
        const auto inc = apply_kernel(K, f);
        CHECK(std::abs(inc.integral()) < 1e-10);
        const auto ref = brute_force_apply(K, f);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(inc[i] == doctest::Approx(ref[i]).epsilon(1e-12).scale(1e-12));
        // antisymmetric generator: <f, K f> = 0
        CHECK(std::abs(dot(f, inc)) < 1e-12 * dot(f, f));
    }
    const auto g2 = WignerGrid::make(2, 4, -3, 3, 5, 4);
    const auto K2 = wigner_kernel_1e(PotentialSpec::quadratic(2.0), g2);
    const auto f2 = random_state(g2, Arity::one, 9);
    CHECK(std::abs(apply_kernel(K2, f2).integral()) < 1e-10);
    CHECK(std::abs(dot(f2, apply_kernel(K2, f2))) < 1e-12 * dot(f2, f2));
    double wrapped = -1.0;
    apply_kernel(K2, f2, &wrapped);
    CHECK(wrapped > 0.0);
}

TEST_CASE("tabulated potentials") {
    const auto g = WignerGrid::make(1, 16, -4, 4, 6, 16);
    std::vector<double> samples;
    const double x0 = -8.0, dx = 0.01;
    for (int k = 0; k <= 1600; ++k) samples.push_back(0.5 * std::pow(x0 + k * dx, 2));
    const auto Kt = wigner_kernel_1e(PotentialSpec::tabulated(x0, dx, samples), g);
    const auto Kq = wigner_kernel_1e(PotentialSpec::quadratic(1.0), g);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < Kt.values().size(); ++i) {
        num += std::pow(Kt.values()[i] - Kq.values()[i], 2);
        den += std::pow(Kq.values()[i], 2);
    }
    CHECK(std::sqrt(num / den) < 1e-3);
    std::vector<double> short_samples(samples.begin(), samples.begin() + 900);
    CHECK_THROWS_AS(wigner_kernel_1e(PotentialSpec::tabulated(x0, dx, short_samples), g), ValidationError);
    CHECK_THROWS_AS(wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 1, 0.0), g), ValidationError);
}

TEST_CASE("two-electron kernel: zero coupling, symmetry and transfer structure") {
    const auto g = WignerGrid::make(1, 12, -6, 6, 10, 12);
    const auto spec = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 0.7);
    UnitSystem off;
    CHECK(coulomb_kernel_2e(off, spec, g).is_zero());

    UnitSystem on;
    on.coupling_lambda = 1.0;
    const auto K = coulomb_kernel_2e(on, spec, g);
    double peak = 0.0;
    for (int i1 = 0; i1 < g.n_x; ++i1)
        for (int i2 = 0; i2 < g.n_x; ++i2)
            for (int m = -(g.n_p - 1); m < g.n_p; ++m) {
                peak = std::max(peak, std::abs(K.value(m, -m, i1, i2)));
                CHECK(K.value(m, -m, i1, i2) == K.value(-m, m, i2, i1));
            }
    CHECK(peak > 0.0);

    // direct double quadrature over (s1, s2) at sampled indices
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> mi(-(g.n_p - 1), g.n_p - 1), xi(0, g.n_x - 1);
    double off_max = 0.0, diag_err = 0.0;
    for (int k = 0; k < 40; ++k) {
        const int m1 = mi(rng), m2 = mi(rng), i1 = xi(rng), i2 = xi(rng);
        const double direct = coulomb_wigner_kernel_direct(on, spec, g, m1, m2, i1, i2);
        if (m1 + m2 != 0) {
            off_max = std::max(off_max, std::abs(direct));
        }
        const double diag = coulomb_wigner_kernel_direct(on, spec, g, m1, -m1, i1, i2);
        diag_err = std::max(diag_err, std::abs(diag - K.value(m1, -m1, i1, i2)));
    }
    CHECK(off_max <= 1e-10 * peak);
    CHECK(diag_err <= 1e-9 * peak);

    CHECK_THROWS_AS(coulomb_kernel_2e(on, PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 0.0), g),
                    ValidationError);
    CHECK_THROWS_AS(coulomb_kernel_2e(on, PotentialSpec::quadratic(1.0), g), ValidationError);
}

TEST_CASE("interaction increment conserves total momentum and normalization") {
    const auto g = WignerGrid::make(1, 10, -6, 6, 8, 10);
    UnitSystem u;
    u.coupling_lambda = 1.0;
    const auto K = coulomb_kernel_2e(u, PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 0.5), g);
    const auto f = random_state(g, Arity::two, 21);
    const auto inc = apply_kernel(K, f);
    CHECK(std::abs(inc.integral()) < 1e-10);
    const auto P = Polynomial::axis(momentum_axis(1, Arity::two, 1)) + Polynomial::axis(momentum_axis(1, Arity::two, 2));
    CHECK(std::abs(integrate_observable(inc, P)) <= 1e-8 * f.l2_norm());
    // electron-1 momentum itself does change
    CHECK(std::abs(integrate_observable(inc, Polynomial::axis(momentum_axis(1, Arity::two, 1)))) > 1e-6);

    CHECK(std::abs(dot(f, inc)) < 1e-12 * dot(f, f));

    // brute-force nested loops over the stored kernel: the transfer (m, -m)
    // moves along the line n1 + n2 = c and wraps within the cells of that line
    const int nx = g.n_x, np = g.n_p;
    WignerState ref = WignerState::zeros(g, Arity::two);
    for (int i1 = 0; i1 < nx; ++i1)
        for (int i2 = 0; i2 < nx; ++i2)
            for (int a = 0; a < np; ++a)
                for (int b = 0; b < np; ++b) {
                    std::vector<int> cells;
                    for (int n1 = 0; n1 < np; ++n1)
                        if (a + b - n1 >= 0 && a + b - n1 < np) cells.push_back(n1);
                    const int len = int(cells.size());
                    const int pos = a - cells.front();
                    for (int m = -(np - 1); m < np; ++m) {
                        const int a2 = cells[((pos + m) % len + len) % len], b2 = a + b - a2;
                        const std::size_t base = (std::size_t(i1) * nx + i2) * np * np;
                        ref[base + a2 * np + b2] += g.dp() * g.dp() * K.value(m, -m, i1, i2) * f[base + a * np + b];
                    }
                }
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        worst = std::max(worst, std::abs(inc[i] - ref[i]));
        peak = std::max(peak, std::abs(ref[i]));
    }
    CHECK(worst <= 1e-12 * peak);
}

TEST_CASE("one-electron kernel acting inside a two-electron state") {
    const auto g = WignerGrid::make(1, 8, -5, 5, 7, 8);
    const auto K = wigner_kernel_1e(PotentialSpec::quadratic(1.0), g);
    const auto f1 = make_gaussian_state(packet1d(-1.0, 0.2, 1.0), g);
    const auto f2 = make_gaussian_state(packet1d(1.0, -0.2, 1.0), g);
    const auto f = tensor_product(f1, f2);
    const auto a = apply_kernel_to_electron(K, f, 1);
    const auto b = tensor_product(apply_kernel(K, f1), f2);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12).scale(1e-14));
    const auto c = apply_kernel_to_electron(K, f, 2);
    const auto d = tensor_product(f1, apply_kernel(K, f2));
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(c[i] == doctest::Approx(d[i]).epsilon(1e-12).scale(1e-14));
}

TEST_CASE("reduced kernel: point-charge limit, zero coupling, symmetry and normalization") {
    const auto g = WignerGrid::make(1, 80, -5, 5, 10, 32);
    const auto spec = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0);
    UnitSystem u;
    u.coupling_lambda = 1.0;
    const double R = 1.0;

    // density concentrated at R with width dx; the momentum profile is irrelevant
    WignerState f = WignerState::zeros(g, Arity::one);
    for (int i = 0; i < g.n_x; ++i)
        for (int n = 0; n < g.n_p; ++n) {
            const double z = (g.x(i) - R) / g.dx();
            f[i * g.n_p + n] = std::exp(-0.5 * z * z) * std::exp(-0.5 * g.p(n) * g.p(n));
        }
    f *= 1.0 / f.integral();
    const auto Kr = reduced_kernel(f, u, spec, g);
    const auto Kp = wigner_kernel_1e(PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, 1.0, {R}), g);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < Kr.values().size(); ++i) {
        num += std::pow(Kr.values()[i] - Kp.values()[i], 2);
        den += std::pow(Kp.values()[i], 2);
    }
    CHECK(std::sqrt(num / den) < 0.02);

    UnitSystem off;
    CHECK(reduced_kernel(f, off, spec, g).is_zero());

    // density symmetric about the centre cell pair: kernel antisymmetric in q everywhere
    const auto fs = make_gaussian_state(packet1d(0.0, 0.0, 1.0), g);
    const auto Ks = reduced_kernel(fs, u, spec, g);
    for (std::size_t r = 0; r < g.position_cells(); ++r)
        for (int m = 0; m < g.n_p; ++m) CHECK(Ks.value(r, m) == -Ks.value(r, -m));
    // mirror symmetry of the symmetric configuration: K(x, q) = -K(-x, q)
    for (int i = 0; i < g.n_x; ++i)
        for (int m = 1; m < g.n_p; ++m)
            CHECK(Ks.value(i, m) == doctest::Approx(-Ks.value(g.n_x - 1 - i, m)).scale(1e-12));

    WignerState bad = fs;
    bad *= 1.1;
    CHECK_THROWS_AS(reduced_kernel(bad, u, spec, g), ValidationError);
    CHECK_NOTHROW(reduced_kernel(bad, *pair_kernel_table(u, spec, g), false));
}
