#pragma once
// Brute-force oracle in a truncated photon-number basis (n = 1 or 2 modes).
// D(xi) acts on mode j as exp(a_j a^dagger - conj(a_j) a) with
// a_j = sqrt(pi) (xi_{q_j} + i xi_{p_j}); matrix elements come from the
// associated-Laguerre closed form.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "gkpshadow/charfun.hpp"
#include "gkpshadow/symplectic.hpp"

namespace gkps {

inline constexpr int kMaxCutoff = 120;

struct FockMatrix {
    int n = 1;
    int cutoff = 0;
    MatrixXcd data;

    int local_dim() const { return cutoff + 1; }
    int dim() const { return n == 1 ? cutoff + 1 : (cutoff + 1) * (cutoff + 1); }
};

inline void check_oracle_shape(int n, int cutoff) {
    if (n < 1 || n > 2) throw Error(Errc::InvalidArgument, "oracle supports n in {1, 2}");
    if (cutoff < 1 || cutoff > kMaxCutoff) throw Error(Errc::CutoffTooSmall, "cutoff outside [1, 120]");
}

/// Single-mode displacement exp(a b^dagger - conj(a) b) truncated to photon numbers <= cutoff.
/// <m|D(a)|n> = sqrt(n!/m!) a^{m-n} e^{-|a|^2/2} L_n^{(m-n)}(|a|^2) for m >= n.
/// Each diagonal offset k runs the Laguerre recurrence on the normalized
/// f_j = sqrt(j!/(j+k)!) x^{k/2} e^{-x/2} L_j^{(k)}(x), which stays O(1).
inline MatrixXcd single_mode_displacement(cd a, int cutoff) {
    const int d = cutoff + 1;
    const double x = std::norm(a);
    if (x == 0) return MatrixXcd::Identity(d, d);
    const cd u = a / std::sqrt(x);
    MatrixXcd D(d, d);
    std::vector<double> f(d);
    for (int k = 0; k < d; ++k) {
        const int len = d - k;
        f[0] = std::exp(-0.5 * x + 0.5 * k * std::log(x) - 0.5 * std::lgamma(k + 1.0));
        if (len > 1) f[1] = f[0] * (1 + k - x) / std::sqrt(1.0 + k);
        for (int j = 1; j + 1 < len; ++j)
            f[j + 1] = ((2 * j + 1 + k - x) * f[j] - std::sqrt(double(j) * (j + k)) * f[j - 1]) /
                       std::sqrt(double(j + 1) * (j + 1 + k));
        const cd up = std::pow(u, k), down = std::pow(-std::conj(u), k);
        for (int j = 0; j < len; ++j) {
            D(j + k, j) = f[j] * up;
            if (k > 0) D(j, j + k) = f[j] * down;
        }
    }
    return D;
}

inline cd mode_amplitude(const VectorXd& xi, int j) {
    const int n = static_cast<int>(xi.size()) / 2;
    return std::sqrt(kPi) * cd(xi[j], xi[n + j]);
}

inline MatrixXcd kron(const MatrixXcd& A, const MatrixXcd& B) {
    MatrixXcd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

/// D(xi) = exp(-i sqrt(2 pi) xi^T J x) in the truncated basis (mode 1 major for n = 2).
inline FockMatrix displacement_matrix(const VectorXd& xi, int cutoff) {
    const int n = static_cast<int>(xi.size()) / 2;
    if (xi.size() % 2 != 0) throw Error(Errc::DimensionMismatch, "xi length");
    check_oracle_shape(n, cutoff);
    FockMatrix out{n, cutoff, single_mode_displacement(mode_amplitude(xi, 0), cutoff)};
    if (n == 2) out.data = kron(out.data, single_mode_displacement(mode_amplitude(xi, 1), cutoff));
    return out;
}

/// Diagonal operator f(total photon number).
template <class F>
inline FockMatrix diagonal_in_number(int n, int cutoff, F f) {
    check_oracle_shape(n, cutoff);
    FockMatrix out{n, cutoff, MatrixXcd::Zero(1, 1)};
    const int d = out.dim();
    out.data = MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const int N = n == 1 ? i : i / (cutoff + 1) + i % (cutoff + 1);
        out.data(i, i) = f(N);
    }
    return out;
}

inline FockMatrix number_operator(int n, int cutoff) {
    return diagonal_in_number(n, cutoff, [](int N) { return static_cast<double>(N); });
}

inline FockMatrix thermal_operator(double beta, int n, int cutoff) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    return diagonal_in_number(n, cutoff, [beta](int N) { return std::exp(-beta * N); });
}

/// Photon numbers per mode in the interior subspace (<= cutoff / 2 each).
inline std::vector<int> interior_indices(int n, int cutoff) {
    std::vector<int> idx;
    const int d1 = cutoff + 1;
    const int h = cutoff / 2;
    if (n == 1) {
        for (int i = 0; i <= h; ++i) idx.push_back(i);
    } else {
        for (int i = 0; i <= h; ++i)
            for (int j = 0; j <= h; ++j) idx.push_back(i * d1 + j);
    }
    return idx;
}

/// max column norm of (A - B) restricted to interior columns and all rows.
inline double interior_residual(const MatrixXcd& A, const MatrixXcd& B, const std::vector<int>& cols) {
    double r = 0;
    for (int c : cols) r = std::max(r, (A.col(c) - B.col(c)).norm());
    return r;
}

/// ||(D^dagger D - I) P_interior||.
inline double interior_unitarity_error(const FockMatrix& D) {
    const MatrixXcd P = D.data.adjoint() * D.data;
    return interior_residual(P, MatrixXcd::Identity(D.dim(), D.dim()), interior_indices(D.n, D.cutoff));
}

inline VectorXcd coherent_vector(const std::vector<cd>& a, int cutoff) {
    const int n = static_cast<int>(a.size());
    check_oracle_shape(n, cutoff);
    auto one = [cutoff](cd al) {
        VectorXcd v(cutoff + 1);
        v[0] = std::exp(-0.5 * std::norm(al));
        for (int m = 1; m <= cutoff; ++m) v[m] = v[m - 1] * al / std::sqrt(static_cast<double>(m));
        return v;
    };
    VectorXcd v = one(a[0]);
    if (n == 2) {
        const VectorXcd w = one(a[1]);
        VectorXcd k(v.size() * w.size());
        for (int i = 0; i < v.size(); ++i) k.segment(i * w.size(), w.size()) = v[i] * w;
        v = k;
    }
    return v;
}

/// Single-mode squeezed vacuum with q variance e^{-2r}/2.
inline VectorXcd squeezed_vector(double r, int cutoff) {
    check_oracle_shape(1, cutoff);
    VectorXcd v = VectorXcd::Zero(cutoff + 1);
    const double t = -std::tanh(r);
    double c = 1.0 / std::sqrt(std::cosh(r));
    for (int k = 0; 2 * k <= cutoff; ++k) {
        v[2 * k] = c;
        // ratio of sqrt((2k+2)!)/(2^{k+1}(k+1)!) to sqrt((2k)!)/(2^k k!)
        c *= t * std::sqrt((2.0 * k + 1) * (2.0 * k + 2)) / (2.0 * (k + 1));
    }
    return v;
}

inline MatrixXcd projector(const VectorXcd& v) { return v * v.adjoint(); }

/// Normalized thermal state with mean photon number nbar (per mode).
inline FockMatrix thermal_density(double nbar, int n, int cutoff) {
    const double q = nbar / (1 + nbar);
    return diagonal_in_number(n, cutoff, [q, nbar, n](int N) { return std::pow(q, N) / std::pow(1 + nbar, n); });
}

/// Oracle characteristic function Tr[D^dagger(xi) rho].
inline cd oracle_char(const MatrixXcd& rho, const VectorXd& xi, int cutoff) {
    const FockMatrix D = displacement_matrix(-xi, cutoff);
    return (D.data * rho).trace();
}

/// Deterministic power iteration from the uniform vector.
inline double power_iteration(const MatrixXcd& H, VectorXcd& v, int iters = 5000, double tol = 1e-14) {
    v = VectorXcd::Constant(H.rows(), cd(1.0, 0.0)).normalized();
    double lam = 0;
    for (int it = 0; it < iters; ++it) {
        VectorXcd w = H * v;
        const double nw = w.norm();
        if (nw == 0) return 0;
        const double next = (v.adjoint() * w)(0).real();
        w /= nw;
        // fix the global phase so that convergence is measurable
        const Eigen::Index k = [&] {
            Eigen::Index best = 0;
            w.cwiseAbs().maxCoeff(&best);
            return best;
        }();
        w *= std::abs(w[k]) / w[k];
        const double change = (w - v).norm();
        v = w;
        lam = next;
        if (change < tol) break;
    }
    return (v.adjoint() * H * v)(0).real();
}

struct GkpState {
    VectorXcd psi;
    double top = 0;
    double second = 0;
    double gap = 0;  // top / |second|
};

/// Pi^{trunc} = sum_{||lambda|| <= radius} e^{i Phi(lambda)} D(lambda).
inline FockMatrix truncated_projector(const SymplecticBasis& basis, double radius, int cutoff) {
    const int n = basis.n();
    check_oracle_shape(n, cutoff);
    const auto pts = enumerate(basis, radius, true);
    FockMatrix P{n, cutoff, MatrixXcd::Zero(1, 1)};
    P.data = MatrixXcd::Zero(P.dim(), P.dim());
    for (const auto& p : pts) {
        const double sign = phase_sign(basis.gram(), p.coeffs.data(), basis.dim());
        P.data += sign * displacement_matrix(p.vec, cutoff).data;
    }
    return P;
}

/// Regularized GKP state: eigenvector of the largest algebraic eigenvalue of
/// e^{-beta N} Pi^{trunc} e^{-beta N}. The finite-radius projector sum has a
/// large negative spectrum in the high-photon block, so a magnitude-based
/// power iteration is not used; the interior-weight check below guards the
/// truncation instead.
inline GkpState gkp_state(const SymplecticBasis& basis, double beta, double radius, int cutoff) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    if (radius < basis.shortest_row_norm()) throw Error(Errc::InvalidArgument, "radius below shortest vector");
    const FockMatrix P = truncated_projector(basis, radius, cutoff);
    const FockMatrix R = thermal_operator(beta, basis.n(), cutoff);
    const MatrixXcd H = R.data * P.data * R.data;
    const Eigen::SelfAdjointEigenSolver<MatrixXcd> es((H + H.adjoint()) / 2.0);
    const Eigen::Index last = es.eigenvalues().size() - 1;
    GkpState out;
    out.top = es.eigenvalues()[last];
    out.second = es.eigenvalues()[last - 1];
    out.psi = es.eigenvectors().col(last);
    // deterministic global phase: largest component real positive
    Eigen::Index k = 0;
    out.psi.cwiseAbs().maxCoeff(&k);
    out.psi *= std::abs(out.psi[k]) / out.psi[k];
    out.gap = std::abs(out.second) > 0 ? out.top / std::abs(out.second) : std::numeric_limits<double>::infinity();
    if (!(out.top > 0) || out.gap < 1.0 + 1e-9) throw Error(Errc::DegenerateTopEigenvalue, "no spectral gap");
    // The regularized state has a physical e^{-2 beta N} tail past cutoff / 2;
    // weight in the top quarter of photon numbers signals truncation (or a
    // projector radius too small for the cutoff).
    const int d1 = cutoff + 1;
    double w = 0;
    for (Eigen::Index i = 0; i < out.psi.size(); ++i) {
        const int hi = basis.n() == 1 ? int(i) : std::max(int(i) / d1, int(i) % d1);
        if (4 * hi > 3 * cutoff) w += std::norm(out.psi[i]);
    }
    if (w > 1e-6) throw Error(Errc::CutoffTooSmall, "state weight near the photon cutoff");
    return out;
}

struct OverlapTraces {
    cd trace_a = 0;
    cd trace_ab = 0;
    cd expect_b = 0;  // <psi_A|B|psi_A> for the dominant eigenvector of Hermitian A
};

inline OverlapTraces overlap_and_traces(const FockMatrix& A, const FockMatrix& B) {
    if (A.dim() != B.dim()) throw Error(Errc::DimensionMismatch, "oracle matrix sizes");
    OverlapTraces out;
    out.trace_a = A.data.trace();
    out.trace_ab = (A.data * B.data).trace();
    VectorXcd v;
    power_iteration(A.data, v);
    out.expect_b = (v.adjoint() * B.data * v)(0);
    return out;
}

/// Little-endian dump: uint64 rows, uint64 cols, then row-major (re, im) doubles.
inline void dump_binary(const FockMatrix& A, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    const std::uint64_t r = A.data.rows(), c = A.data.cols();
    f.write(reinterpret_cast<const char*>(&r), sizeof r);
    f.write(reinterpret_cast<const char*>(&c), sizeof c);
    for (std::uint64_t i = 0; i < r; ++i)
        for (std::uint64_t j = 0; j < c; ++j) {
            const double re = A.data(i, j).real(), im = A.data(i, j).imag();
            f.write(reinterpret_cast<const char*>(&re), sizeof re);
            f.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

inline FockMatrix load_binary(const std::string& path, int n, int cutoff) {
    std::ifstream f(path, std::ios::binary);
    std::uint64_t r = 0, c = 0;
    f.read(reinterpret_cast<char*>(&r), sizeof r);
    f.read(reinterpret_cast<char*>(&c), sizeof c);
    FockMatrix A{n, cutoff, MatrixXcd(r, c)};
    for (std::uint64_t i = 0; i < r; ++i)
        for (std::uint64_t j = 0; j < c; ++j) {
            double re = 0, im = 0;
            f.read(reinterpret_cast<char*>(&re), sizeof re);
            f.read(reinterpret_cast<char*>(&im), sizeof im);
            A.data(i, j) = {re, im};
        }
    return A;
}

struct ConjectureRow {
    std::string label;
    double nbar = 0;
    double min_delta_sq = 0;
    double ratio = 0;  // min Delta^2 * nbar / 4, +inf when nbar = 0
    bool counter_signal = false;
};

/// For each oracle state computes nbar and the minimum Delta^2 over the rows
/// of the candidate bases; ratio < 1 is reported as a counter-signal.
inline std::vector<ConjectureRow> conjecture_probe(const std::vector<std::pair<std::string, FockMatrix>>& states,
                                                   const std::vector<SymplecticBasis>& bases) {
    std::vector<ConjectureRow> rows;
    for (const auto& [label, rho] : states) {
        ConjectureRow row;
        row.label = label;
        row.nbar = (number_operator(rho.n, rho.cutoff).data * rho.data).trace().real();
        row.min_delta_sq = std::numeric_limits<double>::infinity();
        for (const auto& b : bases) {
            for (int i = 0; i < b.dim(); ++i) {
                const VectorXd xi = b.reduced().row(i).transpose();
                const double a = std::abs(oracle_char(rho.data, xi, rho.cutoff));
                const double d2 = a <= 1e-300 ? std::numeric_limits<double>::infinity()
                                              : std::max(0.0, -(2.0 / kPi) * std::log(a));
                row.min_delta_sq = std::min(row.min_delta_sq, d2);
            }
        }
        row.ratio = row.nbar <= 1e-12 ? std::numeric_limits<double>::infinity() : row.min_delta_sq * row.nbar / 4;
        row.counter_signal = row.ratio < 1.0;
        rows.push_back(row);
    }
    return rows;
}

struct RegularizedPointer {
    double regularized = 0;  // Tr[Pi D^dag R rho R D] / Tr[Pi D^dag R^2 D]
    double bare = 0;         // Tr[Pi D^dag rho D]
};

/// Oracle pointer densities at (basis, alpha) with R = e^{-beta N}:
/// regularized = <Lambda|R D^dag rho D R|Lambda> / <Lambda|R^2|Lambda>,
/// bare = <Lambda|D^dag rho D|Lambda>. Every operator is a dense Fock matrix.
inline RegularizedPointer regularized_pointer_oracle(const SymplecticBasis& basis, const VectorXd& alpha,
                                                     const FockMatrix& rho, double beta, double radius) {
    const int cutoff = rho.cutoff;
    const MatrixXcd P = truncated_projector(basis, radius, cutoff).data;
    const MatrixXcd D = displacement_matrix(alpha, cutoff).data;
    const MatrixXcd R = thermal_operator(beta, basis.n(), cutoff).data;
    const MatrixXcd sigma = D.adjoint() * rho.data * D;
    RegularizedPointer out;
    out.regularized = (P * R * sigma * R).trace().real() / (P * R * R).trace().real();
    out.bare = (P * sigma).trace().real();
    return out;
}

/// Interior residual of D(xi) D(eta) - e^{-i pi xi^T J eta} D(xi + eta).
inline double composition_residual(const VectorXd& xi, const VectorXd& eta, int cutoff) {
    const int n = static_cast<int>(xi.size()) / 2;
    const MatrixXcd L = displacement_matrix(xi, cutoff).data * displacement_matrix(eta, cutoff).data;
    const cd ph = std::polar(1.0, -kPi * xi.dot(symplectic_form(n) * eta));
    const MatrixXcd Rm = ph * displacement_matrix(VectorXd(xi + eta), cutoff).data;
    return interior_residual(L, Rm, interior_indices(n, cutoff));
}

}  // namespace gkps
