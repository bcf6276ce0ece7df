#pragma once
// Random symplectic lattices: exact Haar sampling on Y_1, the n-fold direct
// sum ensemble used by the local protocol, and an approximate Y_n sampler
// (p-neighbour Hecke walk) that is not provably Haar.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "gkpshadow/rng.hpp"
#include "gkpshadow/symplectic.hpp"

namespace gkps {

enum class LatticeKind { ExactY1, LocalProduct, ApproxYn };

inline const char* kind_name(LatticeKind k) {
    switch (k) {
        case LatticeKind::ExactY1: return "exact-Y1";
        case LatticeKind::LocalProduct: return "local-product";
        case LatticeKind::ApproxYn: return "approx-Yn";
    }
    return "unknown";
}

struct LatticeSample {
    SymplecticBasis basis;
    LatticeKind kind = LatticeKind::ExactY1;
    std::string seed_path;
    double tau_x = 0, tau_y = 0, theta = 0;  // Y_1 parameters (last mode for products)
};

/// Upper edge of the dominating box in u = 1/y; the fundamental domain reaches
/// down to y = sqrt(3)/2.
inline constexpr double kY1BoxU = 1.1547005383792515;  // 2 / sqrt(3)

/// Draws tau from {|x| <= 1/2, |tau| >= 1} with density proportional to dx dy / y^2.
inline void sample_tau(Rng& rng, double& x, double& y) {
    for (int tries = 0; tries < 100000; ++tries) {
        x = uniform01(rng) - 0.5;
        const double u = kY1BoxU * uniform_open0(rng);
        if (x * x + 1.0 / (u * u) >= 1.0) {
            y = 1.0 / u;
            return;
        }
    }
    throw Error(Errc::RejectionBudgetExceeded, "tau sampler");
}

/// Basis rows of (1/sqrt(y)) (Z + tau Z) rotated by theta.
inline MatrixXd y1_rows(double x, double y, double theta) {
    const double s = 1.0 / std::sqrt(y);
    const double c = std::cos(theta), sn = std::sin(theta);
    MatrixXd M(2, 2);
    M << c * s, sn * s, (c * x - sn * y) * s, (sn * x + c * y) * s;
    return M;
}

inline LatticeSample sample_y1(Rng& rng) {
    LatticeSample out;
    sample_tau(rng, out.tau_x, out.tau_y);
    out.theta = 2.0 * kPi * uniform01(rng);
    out.basis = SymplecticBasis(y1_rows(out.tau_x, out.tau_y, out.theta));
    out.kind = LatticeKind::ExactY1;
    return out;
}

/// Embeds per-mode 2x2 bases into the (q..q, p..p) ordering.
inline MatrixXd direct_sum_rows(const std::vector<MatrixXd>& modes) {
    const int n = static_cast<int>(modes.size());
    MatrixXd M = MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < 2; ++r) {
            M(r * n + i, i) = modes[i](r, 0);
            M(r * n + i, n + i) = modes[i](r, 1);
        }
    }
    return M;
}

/// Direct sum of n independent Y_1 draws.
inline LatticeSample sample_local(int n, Rng& rng, std::vector<MatrixXd>* per_mode = nullptr) {
    if (n < 1) throw Error(Errc::InvalidArgument, "n must be >= 1");
    std::vector<MatrixXd> modes;
    LatticeSample out;
    for (int i = 0; i < n; ++i) {
        sample_tau(rng, out.tau_x, out.tau_y);
        out.theta = 2.0 * kPi * uniform01(rng);
        modes.push_back(y1_rows(out.tau_x, out.tau_y, out.theta));
    }
    out.basis = SymplecticBasis(direct_sum_rows(modes));
    out.kind = n == 1 ? LatticeKind::ExactY1 : LatticeKind::LocalProduct;
    if (per_mode) *per_mode = modes;
    return out;
}

/// Haar-random element of U(n) embedded as a symplectic orthogonal 2n x 2n matrix.
inline MatrixXd random_symplectic_orthogonal(int n, Rng& rng) {
    Eigen::MatrixXcd Z(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Z(i, j) = {normal01(rng), normal01(rng)};
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Z);
    Eigen::MatrixXcd Q = qr.householderQ();
    const Eigen::MatrixXcd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        const std::complex<double> d = R(j, j);
        Q.col(j) *= d / std::abs(d);
    }
    MatrixXd O(2 * n, 2 * n);
    O << Q.real(), -Q.imag(), Q.imag(), Q.real();
    return O;
}

namespace detail {

inline long long mod_p(long long v, long long p) {
    const long long r = v % p;
    return r < 0 ? r + p : r;
}

// Integer row echelon basis of the Z-span of the rows of G (entries small).
inline MatrixXl integer_row_basis(MatrixXl G) {
    const int rows = static_cast<int>(G.rows()), cols = static_cast<int>(G.cols());
    int r = 0;
    for (int c = 0; c < cols && r < rows; ++c) {
        while (true) {
            int piv = -1;
            for (int i = r; i < rows; ++i)
                if (G(i, c) != 0 && (piv < 0 || std::llabs(G(i, c)) < std::llabs(G(piv, c)))) piv = i;
            if (piv < 0) break;
            G.row(r).swap(G.row(piv));
            bool done = true;
            for (int i = r + 1; i < rows; ++i) {
                if (G(i, c) == 0) continue;
                const long long q = G(i, c) / G(r, c);
                G.row(i) -= q * G.row(r);
                if (G(i, c) != 0) done = false;
            }
            if (done) {
                ++r;
                break;
            }
        }
    }
    return G.topRows(r);
}

}  // namespace detail

/// One p-neighbour step: Lambda' = (L + p Lambda) / sqrt(p) for a uniformly
/// random Lagrangian subspace L of Lambda / p Lambda.
inline MatrixXd hecke_step(const SymplecticBasis& basis, long long p, Rng& rng) {
    const int d = basis.dim();
    const int n = basis.n();
    const MatrixXl& A = basis.gram();
    std::vector<VectorXl> L;
    auto form = [&](const VectorXl& u, const VectorXl& v) {
        long long s = 0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) s += u[i] * detail::mod_p(A(i, j), p) * v[j];
        return detail::mod_p(s, p);
    };
    auto in_span = [&](const VectorXl& v) {
        // brute force over the span of L (p^k elements, k < n small)
        const int k = static_cast<int>(L.size());
        long long total = 1;
        for (int i = 0; i < k; ++i) total *= p;
        for (long long idx = 0; idx < total; ++idx) {
            VectorXl w = VectorXl::Zero(d);
            long long t = idx;
            for (int i = 0; i < k; ++i) {
                w += (t % p) * L[i];
                t /= p;
            }
            bool eq = true;
            for (int i = 0; i < d; ++i)
                if (detail::mod_p(w[i] - v[i], p) != 0) {
                    eq = false;
                    break;
                }
            if (eq) return true;
        }
        return false;
    };
    std::uniform_int_distribution<long long> digit(0, p - 1);
    int guard = 0;
    while (static_cast<int>(L.size()) < n) {
        if (++guard > 100000) throw Error(Errc::RejectionBudgetExceeded, "lagrangian sampler");
        VectorXl v(d);
        for (int i = 0; i < d; ++i) v[i] = digit(rng);
        bool iso = true;
        for (const auto& u : L)
            if (form(u, v) != 0) {
                iso = false;
                break;
            }
        if (!iso || in_span(v)) continue;
        L.push_back(v);
    }
    MatrixXl G(n + d, d);
    for (int i = 0; i < n; ++i) G.row(i) = L[i].transpose();
    G.bottomRows(d) = p * MatrixXl::Identity(d, d);
    const MatrixXl H = detail::integer_row_basis(G);
    return H.cast<double>() * basis.M() / std::sqrt(static_cast<double>(p));
}

/// Approximate Y_n sampler: local start, then `steps` rounds of a 2-neighbour
/// Hecke step followed by a random symplectic orthogonal rotation.
inline LatticeSample sample_yn_approx(int n, int steps, Rng& rng) {
    if (n < 2) throw Error(Errc::InvalidArgument, "approximate sampler needs n >= 2");
    LatticeSample s = sample_local(n, rng);
    SymplecticBasis b = s.basis;
    for (int k = 0; k < steps; ++k) {
        const MatrixXd next = hecke_step(b, 2, rng);
        const MatrixXd O = random_symplectic_orthogonal(n, rng);
        b = reduce_basis(SymplecticBasis(next * O.transpose()));
    }
    s.basis = b;
    s.kind = LatticeKind::ApproxYn;
    return s;
}

}  // namespace gkps
