#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wigner2e/errors.hpp"

namespace wigner2e {

// Dimensionless units. hbar, mass and charge are fixed to 1; only the
// interaction strength is a free parameter.
struct UnitSystem {
    double hbar = 1.0;
    double mass = 1.0;
    double charge = 1.0;
    double coupling_lambda = 0.0;

    void validate() const;
};

inline constexpr double kHbar = 1.0;
inline constexpr double kPi = 3.14159265358979323846;

// Phase-space mesh shared by every axis of a state. Positions are cell
// centred, x_i = x_min + (i + 1/2) dx. Momenta sit on a symmetric window
// p_n = (n - (n_p - 1)/2) dp with dp = pi hbar / coherence_length, so the
// difference of two grid momenta is an integer multiple of dp.
struct WignerGrid {
    int d = 1;
    int n_x = 0;
    double x_min = 0.0;
    double x_max = 0.0;
    double coherence_length = 0.0;
    int n_p = 0;

    static WignerGrid make(int d, int n_x, double x_min, double x_max, double coherence_length, int n_p);
    void validate() const;

    double dx() const { return (x_max - x_min) / n_x; }
    double dp() const { return kPi * kHbar / coherence_length; }
    double x(int i) const { return x_min + (i + 0.5) * dx(); }
    double p(int n) const { return (n - 0.5 * (n_p - 1)) * dp(); }
    double p_max() const { return 0.5 * n_p * dp(); }

    // Number of position / momentum cells of one electron (n_x^d, n_p^d).
    std::size_t position_cells() const;
    std::size_t momentum_cells() const;
    // (dx dp)^d, the phase-space volume of one cell of one electron.
    double cell_volume() const;
    int transfer_count() const { return 2 * n_p - 1; }

    bool operator==(const WignerGrid&) const = default;
    std::string describe() const;
};

enum class Arity { one = 1, two = 2 };

// Axes of a state are ordered positions first, then momenta:
// one electron  (x[, y], Px[, Py]); two electrons (r1, r2, P1, P2) with
// d components each. Electrons are numbered 1 and 2.
int position_axis(int d, Arity arity, int electron, int component = 0);
int momentum_axis(int d, Arity arity, int electron, int component = 0);

class WignerState {
public:
    WignerState() = default;
    WignerState(WignerGrid grid, Arity arity, std::vector<double> values, double time = 0.0);
    static WignerState zeros(const WignerGrid& grid, Arity arity, double time = 0.0);

    const WignerGrid& grid() const { return grid_; }
    Arity arity() const { return arity_; }
    int electrons() const { return static_cast<int>(arity_); }
    int axis_count() const { return 2 * grid_.d * electrons(); }
    std::vector<int> shape() const;
    std::size_t size() const { return values_.size(); }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    // Volume element of a full cell ((dx dp)^d per electron).
    double cell_volume() const;
    // Cell sum times cell volume.
    double integral() const;
    // sqrt(sum f^2 * cell volume).
    double l2_norm() const;
    bool all_finite() const;

    // Phase-space coordinates of a cell in axis order.
    void coordinates(std::size_t index, std::span<double> out) const;

    WignerState& operator+=(const WignerState& o);
    WignerState& operator-=(const WignerState& o);
    WignerState& operator*=(double c);
    // this += c * o
    void axpy(double c, const WignerState& o);

private:
    WignerGrid grid_;
    Arity arity_ = Arity::one;
    std::vector<double> values_;
    double time_ = 0.0;
};

WignerState operator+(WignerState a, const WignerState& b);
WignerState operator-(WignerState a, const WignerState& b);
WignerState operator*(double c, WignerState a);

void require_same_grid(const WignerState& a, const WignerState& b, const char* where);

struct GaussianPacket {
    std::vector<double> center_r;
    std::vector<double> center_p;
    std::vector<double> sigma;

    void validate(int d) const;
    // Momentum spread hbar / (2 sigma) of the minimal-uncertainty state.
    double sigma_p(int axis) const { return kHbar / (2.0 * sigma[axis]); }
};

// Closed-form Wigner function of a minimal-uncertainty Gaussian packet.
double gaussian_wigner(const GaussianPacket& packet, std::span<const double> r, std::span<const double> p);

// Gaussian sampled at cell centres and renormalized to unit integral.
WignerState make_gaussian_state(const GaussianPacket& packet, const WignerGrid& grid);

// Phase-space Gaussian with independent spreads; admissible (a convex
// mixture of pure Gaussians) only when sigma_r * sigma_p >= hbar/2 per axis.
WignerState make_phase_space_gaussian(std::span<const double> center_r, std::span<const double> center_p,
                                      std::span<const double> sigma_r, std::span<const double> sigma_p,
                                      const WignerGrid& grid);

// Convex combination sum_k w_k f_k; weights must be nonnegative and sum to 1.
WignerState mixture(std::span<const WignerState> states, std::span<const double> weights);

WignerState tensor_product(const WignerState& f1, const WignerState& f2);
WignerState marginal(const WignerState& f, int keep);

struct Monomial {
    double coefficient = 1.0;
    std::vector<int> powers;  // indexed by state axis
};

// Polynomial observable in the phase-space coordinates of a state.
class Polynomial {
public:
    Polynomial() = default;
    static Polynomial constant(double c);
    static Polynomial axis(int axis, int power = 1);

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double c) const;

    int degree() const;
    const std::vector<Monomial>& terms() const { return terms_; }
    double evaluate(std::span<const double> z) const;

private:
    std::vector<Monomial> terms_;
};

// Phase-space average sum O f / sum f.
double moment(const WignerState& f, const Polynomial& observable);
// Unnormalized integral sum O f * cell volume (usable on increments).
double integrate_observable(const WignerState& f, const Polynomial& observable);

}  // namespace wigner2e
