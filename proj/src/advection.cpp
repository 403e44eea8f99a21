#include "wigner2e/advection.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "wigner2e/parallel.hpp"

namespace wigner2e {

const char* to_string(Interpolation m) {
    switch (m) {
        case Interpolation::spectral: return "spectral";
        case Interpolation::linear: return "linear";
        case Interpolation::cubic: return "cubic";
    }
    return "?";
}

Interpolation interpolation_from_string(const std::string& s) {
    if (s == "spectral") return Interpolation::spectral;
    if (s == "linear") return Interpolation::linear;
    if (s == "cubic") return Interpolation::cubic;
    throw ValidationError("interpolation must be spectral, linear or cubic, got '" + s + "'");
}

std::vector<double> shift_matrix(int n, double a, Interpolation method) {
    if (n < 1) throw ValidationError("shift_matrix: n must be >= 1");
    std::vector<double> S(std::size_t(n) * n, 0.0);
    auto at = [&](int i, int j) -> double& { return S[std::size_t(((j % n) + n) % n) * n + i]; };
    switch (method) {
        case Interpolation::spectral: {
            // Dirichlet kernel over the 2K + 1 modes |k| <= K kept
            const int K = (n - 1) / 2;
            std::vector<double> D(2 * n);
            for (int u = -n + 1; u < n; ++u) {
                const double x = 2.0 * kPi * (u - a) / n;
                const double den = std::sin(0.5 * x);
                D[u + n] = std::abs(den) < 1e-13 ? (2.0 * K + 1.0) * std::cos((K + 0.5) * x) / (n * std::cos(0.5 * x))
                                                 : std::sin((K + 0.5) * x) / (n * den);
            }
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) S[std::size_t(j) * n + i] = D[i - j + n];
            break;
        }
        case Interpolation::linear: {
            const double k = std::floor(a);
            const double w = a - k;
            for (int i = 0; i < n; ++i) {
                at(i, i - int(k)) += 1.0 - w;
                at(i, i - int(k) - 1) += w;
            }
            break;
        }
        case Interpolation::cubic: {
            for (int i = 0; i < n; ++i) {
                const double x = i - a;
                const double j0 = std::floor(x);
                const double mu = x - j0;
                const int j = int(j0);
                at(i, j - 1) += -mu * (mu - 1) * (mu - 2) / 6.0;
                at(i, j) += (mu + 1) * (mu - 1) * (mu - 2) / 2.0;
                at(i, j + 1) += -(mu + 1) * mu * (mu - 2) / 2.0;
                at(i, j + 2) += (mu + 1) * mu * (mu - 1) / 6.0;
            }
            break;
        }
    }
    return S;
}

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// out(r, c) = sum_j S(r, j) in(j, c) with element (r, c) at r*rs + c*cs.
// Strided operands are gathered into contiguous buffers first, which is much
// faster than letting the product read them in place.
inline void apply_block(const std::vector<double>& S, int n, const double* in, double* out, std::ptrdiff_t rs,
                        int cols, std::ptrdiff_t cs) {
    Eigen::Map<const Mat> M(S.data(), n, n);
    if (rs == 1) {
        Eigen::Map<const Mat, 0, Eigen::OuterStride<>> X(in, n, cols, Eigen::OuterStride<>(cs));
        Eigen::Map<Mat, 0, Eigen::OuterStride<>> Y(out, n, cols, Eigen::OuterStride<>(cs));
        Y.noalias() = M * X;
        return;
    }
    if (cs == 1) {
        Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> X(in, n, cols, Eigen::OuterStride<>(rs));
        Eigen::Map<RowMat, 0, Eigen::OuterStride<>> Y(out, n, cols, Eigen::OuterStride<>(rs));
        Y.noalias() = M * X;
        return;
    }
    thread_local Mat X, Y;
    X.resize(n, cols);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < cols; ++c) X(r, c) = in[r * rs + c * cs];
    Y.noalias() = M * X;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < cols; ++c) out[r * rs + c * cs] = Y(r, c);
}

std::vector<std::vector<double>> drift_matrices(const WignerGrid& g, double tau, Interpolation method,
                                                const UnitSystem& u) {
    std::vector<std::vector<double>> out(g.n_p);
    for (int k = 0; k < g.n_p; ++k) out[k] = shift_matrix(g.n_x, g.p(k) * tau / (u.mass * g.dx()), method);
    return out;
}

}  // namespace

Advection1e::Advection1e(const WignerGrid& grid, const FieldConfig& fields, double tau, Interpolation method,
                         const UnitSystem& units)
    : grid_(grid), tau_(tau) {
    grid.validate();
    fields.validate(grid.d);
    rotation_ = grid.d == 2 && fields.has_magnetic();
    drift_ = drift_matrices(grid, rotation_ ? 0.5 * tau : tau, method, units);
    if (!rotation_) return;
    const int n = grid.n_x, q = grid.n_p;
    shear_a_.resize(n);
    shear_b_.resize(n);
    for (int ix = 0; ix < n; ++ix) {
        const double theta = units.charge / units.mass * fields.Bz({grid.x(ix), 0.0}) * tau;
        const double t = std::tan(0.5 * theta), s = std::sin(theta);
        shear_a_[ix].resize(q);
        shear_b_[ix].resize(q);
        for (int k = 0; k < q; ++k) {
            const double pk = grid.p(k) / grid.dp();
            shear_a_[ix][k] = shift_matrix(q, t * pk, method);
            shear_b_[ix][k] = shift_matrix(q, -s * pk, method);
        }
    }
}

void Advection1e::drift(const double* in, double* out) const {
    const int n = grid_.n_x, q = grid_.n_p;
    if (grid_.d == 1) {
        parallel_for(std::size_t(q), [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) apply_block(drift_[k], n, in + k, out + k, q, 1, 1);
        });
        return;
    }
    // x shift per Px, then y shift per Py
    const std::ptrdiff_t q2 = std::ptrdiff_t(q) * q;
    scratch_.resize(std::size_t(n) * n * q2);
    double* tmp = scratch_.data();
    parallel_for(std::size_t(q) * n, [&](std::size_t b, std::size_t e) {
        for (std::size_t w = b; w < e; ++w) {
            const int px = int(w / n), iy = int(w % n);
            const std::ptrdiff_t off = iy * q2 + px * q;
            apply_block(drift_[px], n, in + off, tmp + off, n * q2, q, 1);
        }
    });
    parallel_for(std::size_t(q) * n, [&](std::size_t b, std::size_t e) {
        for (std::size_t w = b; w < e; ++w) {
            const int py = int(w / n), ix = int(w % n);
            const std::ptrdiff_t off = ix * n * q2 + py;
            apply_block(drift_[py], n, tmp + off, out + off, q2, q, q);
        }
    });
}

void Advection1e::rotate(const double* in, double* out) const {
    const int n = grid_.n_x, q = grid_.n_p;
    const std::ptrdiff_t q2 = std::ptrdiff_t(q) * q;
    std::vector<double> tmp(std::size_t(n) * n * q2);
    auto shear_a = [&](const double* src, double* dst) {
        parallel_for(std::size_t(n) * q, [&](std::size_t b, std::size_t e) {
            for (std::size_t w = b; w < e; ++w) {
                const int ix = int(w / q), py = int(w % q);
                const std::ptrdiff_t off = ix * n * q2 + py;
                apply_block(shear_a_[ix][py], q, src + off, dst + off, q, n, q2);
            }
        });
    };
    auto shear_b = [&](const double* src, double* dst) {
        parallel_for(std::size_t(n) * q, [&](std::size_t b, std::size_t e) {
            for (std::size_t w = b; w < e; ++w) {
                const int ix = int(w / q), px = int(w % q);
                const std::ptrdiff_t off = ix * n * q2 + px * q;
                apply_block(shear_b_[ix][px], q, src + off, dst + off, 1, n, q2);
            }
        });
    };
    shear_a(in, out);
    shear_b(out, tmp.data());
    shear_a(tmp.data(), out);
}

void Advection1e::apply(const WignerState& in, WignerState& out) const {
    if (in.grid() != grid_ || in.arity() != Arity::one)
        throw ValidationError("Advection1e: state does not match the advection grid");
    if (out.grid() != grid_ || out.arity() != Arity::one || out.data() == in.data())
        out = WignerState::zeros(grid_, Arity::one);
    if (!rotation_) {
        drift(in.data(), out.data());
    } else {
        std::vector<double> a(in.size());
        drift(in.data(), out.data());
        rotate(out.data(), a.data());
        drift(a.data(), out.data());
    }
    out.set_time(in.time() + tau_);
}

WignerState Advection1e::apply(const WignerState& in) const {
    WignerState out;
    apply(in, out);
    return out;
}

Advection2e::Advection2e(const WignerGrid& grid, double tau, Interpolation method, const UnitSystem& units)
    : grid_(grid), tau_(tau) {
    grid.validate();
    if (grid.d != 1) throw ValidationError("Advection2e: two-electron grid states require d = 1");
    drift_ = drift_matrices(grid, tau, method, units);
}

void Advection2e::apply(const WignerState& in, WignerState& out) const {
    if (in.grid() != grid_ || in.arity() != Arity::two)
        throw ValidationError("Advection2e: state does not match the advection grid");
    if (out.grid() != grid_ || out.arity() != Arity::two || out.data() == in.data())
        out = WignerState::zeros(grid_, Arity::two);
    const int R = grid_.n_x, Q = grid_.n_p;
    const std::ptrdiff_t q2 = std::ptrdiff_t(Q) * Q;
    scratch_.resize(in.size());
    const double* src = in.data();
    double* tmp = scratch_.data();
    double* dst = out.data();
    // r1 shift per P1: rows r1 (stride R Q^2), columns P2
    parallel_for(std::size_t(Q) * R, [&](std::size_t b, std::size_t e) {
        for (std::size_t w = b; w < e; ++w) {
            const int p1 = int(w / R), r2 = int(w % R);
            const std::ptrdiff_t off = r2 * q2 + p1 * Q;
            apply_block(drift_[p1], R, src + off, tmp + off, R * q2, Q, 1);
        }
    });
    // r2 shift per P2: rows r2 (stride Q^2), columns P1 (stride Q)
    parallel_for(std::size_t(Q) * R, [&](std::size_t b, std::size_t e) {
        for (std::size_t w = b; w < e; ++w) {
            const int p2 = int(w / R), r1 = int(w % R);
            const std::ptrdiff_t off = r1 * R * q2 + p2;
            apply_block(drift_[p2], R, tmp + off, dst + off, q2, Q, Q);
        }
    });
    out.set_time(in.time() + tau_);
}

WignerState Advection2e::apply(const WignerState& in) const {
    WignerState out;
    apply(in, out);
    return out;
}

double edge_mass(const WignerState& f, int cells) {
    const auto& g = f.grid();
    const int axes = g.d * f.electrons();
    const std::size_t np = std::size_t(std::pow(g.n_p, axes));
    const std::size_t nr = f.size() / np;
    double s = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
        std::size_t rest = r;
        bool edge = false;
        for (int a = 0; a < axes; ++a) {
            const int i = int(rest % g.n_x);
            rest /= g.n_x;
            edge = edge || i < cells || i >= g.n_x - cells;
        }
        if (!edge) continue;
        for (std::size_t k = 0; k < np; ++k) s += f[r * np + k];
    }
    return std::abs(s) * f.cell_volume();
}

}  // namespace wigner2e
