#pragma once
// Symplectic lattices: bases, integral Gram forms, stabilizer phases,
// bounded point enumeration and fundamental-cell reduction.
//
// Conventions: phase-space vectors are ordered (q_1..q_n, p_1..p_n) and
// J = [[0, I], [-I, 0]]. A basis is a 2n x 2n matrix M whose rows are the
// generators xi_1..xi_2n; lattice points are lambda = M^T a for integer a.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gkpshadow/errors.hpp"

namespace gkps {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixXl = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXl = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

inline constexpr double kPi = 3.14159265358979323846;

/// Symplectic form J on R^{2n} in (q..q, p..p) ordering.
inline MatrixXd symplectic_form(int n) {
    MatrixXd J = MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        J(i, n + i) = 1.0;
        J(n + i, i) = -1.0;
    }
    return J;
}

/// J * v without forming J.
inline VectorXd apply_j(const VectorXd& v) {
    const int n = static_cast<int>(v.size()) / 2;
    VectorXd out(v.size());
    for (int i = 0; i < n; ++i) {
        out[i] = v[n + i];
        out[n + i] = -v[i];
    }
    return out;
}

struct SymplecticCheck {
    bool ok = false;
    MatrixXl gram;         // rounded M J M^T
    double residual = 0;   // max |M J M^T - gram|
    double det = 0;        // det M
};

/// Checks that M J M^T is integral and |det M| = 1, both within tol.
inline SymplecticCheck check_symplectic(const MatrixXd& M, double tol = 1e-9) {
    if (M.rows() != M.cols()) throw Error(Errc::NonSquare, "basis matrix is not square");
    if (M.rows() % 2 != 0) throw Error(Errc::OddDimension, "basis dimension is odd");
    const int n = static_cast<int>(M.rows()) / 2;
    const MatrixXd A = M * symplectic_form(n) * M.transpose();
    SymplecticCheck out;
    out.gram = A.array().round().cast<long long>().matrix();
    out.residual = (A - out.gram.cast<double>()).cwiseAbs().maxCoeff();
    out.det = M.determinant();
    out.ok = M.allFinite() && out.residual <= tol && std::abs(std::abs(out.det) - 1.0) <= tol;
    return out;
}

namespace detail {

// Gram-Schmidt norms squared and coefficients of the rows of B.
inline void gram_schmidt(const MatrixXd& B, MatrixXd& mu, VectorXd& bstar2) {
    const int d = static_cast<int>(B.rows());
    MatrixXd bs = B;
    mu = MatrixXd::Zero(d, d);
    bstar2 = VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < i; ++j) {
            mu(i, j) = B.row(i).dot(bs.row(j)) / bstar2[j];
            bs.row(i) -= mu(i, j) * bs.row(j);
        }
        bstar2[i] = bs.row(i).squaredNorm();
    }
}

// Lagrange-Gauss reduction of a two-row basis; U tracks the integer transform.
inline void gauss_reduce(MatrixXd& B, MatrixXl& U) {
    for (int iter = 0; iter < 10000; ++iter) {
        if (B.row(1).squaredNorm() < B.row(0).squaredNorm()) {
            B.row(0).swap(B.row(1));
            U.row(0).swap(U.row(1));
        }
        const double m = std::round(B.row(0).dot(B.row(1)) / B.row(0).squaredNorm());
        if (m == 0.0) return;
        B.row(1) -= m * B.row(0);
        U.row(1) -= static_cast<long long>(m) * U.row(0);
    }
}

// Textbook LLL with delta = 0.99; dimensions here are small (2n <= 8 in practice).
inline void lll_reduce(MatrixXd& B, MatrixXl& U) {
    const int d = static_cast<int>(B.rows());
    const double delta = 0.99;
    MatrixXd mu;
    VectorXd bstar2;
    gram_schmidt(B, mu, bstar2);
    int k = 1;
    int guard = 0;
    while (k < d && guard++ < 100000) {
        for (int j = k - 1; j >= 0; --j) {
            const double q = std::round(mu(k, j));
            if (q != 0.0) {
                B.row(k) -= q * B.row(j);
                U.row(k) -= static_cast<long long>(q) * U.row(j);
                gram_schmidt(B, mu, bstar2);
            }
        }
        if (bstar2[k] >= (delta - mu(k, k - 1) * mu(k, k - 1)) * bstar2[k - 1]) {
            ++k;
        } else {
            B.row(k).swap(B.row(k - 1));
            U.row(k).swap(U.row(k - 1));
            gram_schmidt(B, mu, bstar2);
            k = std::max(k - 1, 1);
        }
    }
}

}  // namespace detail

/// A basis of a symplectic lattice together with a cached reduced basis.
/// Immutable after construction.
class SymplecticBasis {
public:
    SymplecticBasis() = default;

    explicit SymplecticBasis(const MatrixXd& M, double tol = 1e-9) : M_(M), tol_(tol) {
        const SymplecticCheck chk = check_symplectic(M, tol);
        if (!chk.ok) {
            std::ostringstream os;
            os << "gram residual " << chk.residual << ", det " << chk.det;
            throw Error(Errc::NotSymplectic, os.str());
        }
        for (int i = 0; i < M.rows(); ++i)
            if (M.row(i).norm() == 0.0) throw Error(Errc::NotSymplectic, "zero generator row");
        A_ = chk.gram;
        residual_ = chk.residual;
        n_ = static_cast<int>(M.rows()) / 2;
        reduce();
    }

    int n() const { return n_; }
    int dim() const { return 2 * n_; }
    double tol() const { return tol_; }
    const MatrixXd& M() const { return M_; }
    const MatrixXl& gram() const { return A_; }
    double gram_residual() const { return residual_; }
    /// Reduced basis rows, reduced = U * M.
    const MatrixXd& reduced() const { return R_; }
    const MatrixXl& U() const { return U_; }
    /// Lower bound on the shortest nonzero vector length (exact for n = 1).
    double shortest_lower_bound() const { return shortest_lb_; }
    /// Length of the shortest reduced row (upper bound; exact for n = 1).
    double shortest_row_norm() const { return shortest_row_; }
    /// M^{-T}, used for basis coordinates of phase-space vectors.
    const MatrixXd& M_inv_t() const { return MinvT_; }

private:
    void reduce() {
        R_ = M_;
        U_ = MatrixXl::Identity(dim(), dim());
        if (n_ == 1) {
            detail::gauss_reduce(R_, U_);
        } else {
            detail::lll_reduce(R_, U_);
        }
        MatrixXd mu;
        VectorXd bstar2;
        detail::gram_schmidt(R_, mu, bstar2);
        shortest_lb_ = std::sqrt(bstar2.minCoeff());
        shortest_row_ = R_.rowwise().norm().minCoeff();
        if (n_ == 1) shortest_lb_ = shortest_row_;
        MinvT_ = M_.transpose().inverse();
    }

    MatrixXd M_;
    MatrixXl A_;
    MatrixXd R_;
    MatrixXl U_;
    MatrixXd MinvT_;
    double tol_ = 1e-9;
    double residual_ = 0;
    double shortest_lb_ = 0;
    double shortest_row_ = 0;
    int n_ = 0;
};

/// e^{i Phi(M^T a)} in {+1, -1} for the fixed composition order
/// D(xi_1)^{a_1} ... D(xi_2n)^{a_2n}: Phi = pi sum_{i<j} a_i a_j A_ij mod 2 pi.
inline int phase_sign(const MatrixXl& A, const long long* a, int d) {
    long long parity = 0;
    for (int i = 0; i < d; ++i) {
        if ((a[i] & 1LL) == 0) continue;
        for (int j = i + 1; j < d; ++j)
            if ((a[j] & 1LL) != 0) parity ^= (A(i, j) & 1LL);
    }
    return parity ? -1 : 1;
}

/// Stabilizer phase Phi in {0, pi}.
inline double phase(const SymplecticBasis& basis, const VectorXl& a) {
    if (a.size() != basis.dim()) throw Error(Errc::DimensionMismatch, "coefficient length");
    return phase_sign(basis.gram(), a.data(), basis.dim()) < 0 ? kPi : 0.0;
}

struct LatticePoint {
    VectorXl coeffs;  // coefficients in the given (unreduced) basis
    VectorXd vec;     // M^T coeffs
    double norm = 0;
};

/// Flat point storage for hot loops. When `half` is set only one point of each
/// +-lambda pair is stored (origin kept separately via has_origin).
struct PointSet {
    int dim = 0;
    double radius = 0;
    bool half = false;
    bool has_origin = false;
    std::vector<double> vec;        // size * dim
    std::vector<double> jvec;       // J lambda, size * dim
    std::vector<long long> coeffs;  // original-basis coefficients, size * dim
    std::vector<double> norm2;
    std::vector<signed char> sign;  // e^{i Phi}
    std::size_t size() const { return norm2.size(); }
    const double* v(std::size_t k) const { return vec.data() + k * dim; }
    const double* jv(std::size_t k) const { return jvec.data() + k * dim; }
    const long long* c(std::size_t k) const { return coeffs.data() + k * dim; }
};

inline constexpr std::size_t kDefaultPointCap = 1000000;

/// Fincke-Pohst enumeration of nonzero points with norm <= radius over the
/// reduced basis. Origin is never stored in the list (see has_origin).
inline PointSet enumerate_points(const SymplecticBasis& basis, double radius, bool include_origin,
                                 bool half, std::size_t cap = kDefaultPointCap) {
    PointSet ps;
    const int d = basis.dim();
    const int n = basis.n();
    ps.dim = d;
    ps.radius = radius;
    ps.half = half;
    ps.has_origin = include_origin;
    if (!(radius > 0)) return ps;
    const MatrixXd& B = basis.reduced();
    const MatrixXd Q = B * B.transpose();
    const Eigen::LLT<MatrixXd> llt(Q);
    if (llt.info() != Eigen::Success) throw Error(Errc::SingularBasis, "gram matrix not positive definite");
    const MatrixXd Rm = llt.matrixU();
    const double r2 = radius * radius;
    const MatrixXl Ut = basis.U().transpose();

    std::vector<long long> x(d, 0);
    std::vector<double> partial(d + 1, 0.0);  // accumulated squared length from levels > i
    std::vector<long long> hi(d, 0);
    std::vector<double> tmpv(d), tmpj(d);
    std::vector<long long> tmpa(d);

    // Level bounds for index i given x_{i+1..d-1}.
    auto center_of = [&](int i) {
        double s = 0;
        for (int j = i + 1; j < d; ++j) s += Rm(i, j) * static_cast<double>(x[j]);
        return -s / Rm(i, i);
    };
    auto set_level = [&](int i) -> bool {
        const double rem = r2 - partial[i + 1];
        if (rem < 0) return false;
        const double c = center_of(i);
        const double w = std::sqrt(rem) / Rm(i, i);
        const double lo = std::ceil(c - w - 1e-12);
        const double h = std::floor(c + w + 1e-12);
        if (lo > h) return false;
        x[i] = static_cast<long long>(lo);
        hi[i] = static_cast<long long>(h);
        return true;
    };
    auto level_len = [&](int i) {
        double s = 0;
        for (int j = i; j < d; ++j) s += Rm(i, j) * static_cast<double>(x[j]);
        return s * s;
    };

    int i = d - 1;
    bool ok = set_level(i);
    while (true) {
        if (!ok) {
            // climb up
            ++i;
            if (i >= d) break;
            ++x[i];
            ok = x[i] <= hi[i];
            continue;
        }
        const double pl = partial[i + 1] + level_len(i);
        if (pl > r2 * (1 + 1e-12) + 1e-300) {
            ++x[i];
            ok = x[i] <= hi[i];
            continue;
        }
        if (i > 0) {
            partial[i] = pl;
            --i;
            ok = set_level(i);
            continue;
        }
        // leaf: full vector x
        bool zero = true;
        int first_nz = 0;
        for (int j = 0; j < d; ++j)
            if (x[j] != 0) {
                zero = false;
                first_nz = j;
                break;
            }
        if (!zero && (!half || x[first_nz] > 0)) {
            for (int r = 0; r < d; ++r) {
                long long s = 0;
                for (int j = 0; j < d; ++j) s += Ut(r, j) * x[j];
                tmpa[r] = s;
            }
            double nn = 0;
            for (int r = 0; r < d; ++r) {
                double s = 0;
                for (int j = 0; j < d; ++j) s += B(j, r) * static_cast<double>(x[j]);
                tmpv[r] = s;
                nn += s * s;
            }
            if (nn <= r2) {
                for (int q = 0; q < n; ++q) {
                    tmpj[q] = tmpv[n + q];
                    tmpj[n + q] = -tmpv[q];
                }
                ps.vec.insert(ps.vec.end(), tmpv.begin(), tmpv.end());
                ps.jvec.insert(ps.jvec.end(), tmpj.begin(), tmpj.end());
                ps.coeffs.insert(ps.coeffs.end(), tmpa.begin(), tmpa.end());
                ps.norm2.push_back(nn);
                ps.sign.push_back(static_cast<signed char>(phase_sign(basis.gram(), tmpa.data(), d)));
                if (ps.norm2.size() > cap)
                    throw Error(Errc::RadiusTooLarge, "enumeration exceeded point cap");
            }
        }
        ++x[0];
        ok = x[0] <= hi[0];
    }
    return ps;
}

/// All points with ||lambda|| <= radius, sorted by norm then lexicographic coefficients.
inline std::vector<LatticePoint> enumerate(const SymplecticBasis& basis, double radius, bool include_origin,
                                           std::size_t cap = kDefaultPointCap) {
    const PointSet ps = enumerate_points(basis, radius, false, false, cap);
    std::vector<LatticePoint> out;
    out.reserve(ps.size() + 1);
    const int d = basis.dim();
    if (include_origin && radius >= 0) out.push_back({VectorXl::Zero(d), VectorXd::Zero(d), 0.0});
    for (std::size_t k = 0; k < ps.size(); ++k) {
        LatticePoint p;
        p.coeffs = Eigen::Map<const VectorXl>(ps.c(k), d);
        p.vec = Eigen::Map<const VectorXd>(ps.v(k), d);
        p.norm = std::sqrt(ps.norm2[k]);
        out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(), [](const LatticePoint& a, const LatticePoint& b) {
        if (a.norm != b.norm) return a.norm < b.norm;
        return std::lexicographical_compare(a.coeffs.data(), a.coeffs.data() + a.coeffs.size(),
                                            b.coeffs.data(), b.coeffs.data() + b.coeffs.size());
    });
    return out;
}

inline long long coeff_gcd(const long long* a, int d) {
    long long g = 0;
    for (int i = 0; i < d; ++i) g = std::gcd(g, a[i] < 0 ? -a[i] : a[i]);
    return g;
}

/// Keeps points whose coefficient vector has gcd 1.
inline std::vector<LatticePoint> primitive_filter(const std::vector<LatticePoint>& pts) {
    std::vector<LatticePoint> out;
    for (const auto& p : pts)
        if (coeff_gcd(p.coeffs.data(), static_cast<int>(p.coeffs.size())) == 1) out.push_back(p);
    return out;
}

/// Basis coordinates u = M^{-T} x.
inline VectorXd basis_coords(const SymplecticBasis& basis, const VectorXd& x) {
    if (x.size() != basis.dim()) throw Error(Errc::DimensionMismatch, "vector length");
    return basis.M_inv_t() * x;
}

/// Reduces x into the centered cell M^T [-1/2, 1/2)^{2n}.
inline VectorXd reduce_mod_cell(const SymplecticBasis& basis, const VectorXd& x) {
    if (x.size() != basis.dim()) throw Error(Errc::DimensionMismatch, "vector length");
    if (!basis.M_inv_t().allFinite()) throw Error(Errc::SingularBasis, "basis not invertible");
    VectorXd u = basis.M_inv_t() * x;
    for (int i = 0; i < u.size(); ++i) u[i] -= std::floor(u[i] + 0.5);
    return basis.M().transpose() * u;
}

/// True when x lies in the centered cell of the basis (with slack eps).
inline bool in_cell(const SymplecticBasis& basis, const VectorXd& x, double eps = 1e-9) {
    const VectorXd u = basis.M_inv_t() * x;
    for (int i = 0; i < u.size(); ++i)
        if (u[i] < -0.5 - eps || u[i] >= 0.5 + eps) return false;
    return true;
}

/// A basis of the same lattice built from the cached reduced rows.
inline SymplecticBasis reduce_basis(const SymplecticBasis& basis) {
    return SymplecticBasis(basis.reduced(), basis.tol());
}

/// Parses whitespace-separated rows of decimals.
inline MatrixXd parse_matrix_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) throw Error(Errc::NonSquare, "empty matrix");
    MatrixXd M(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw Error(Errc::NonSquare, "ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c) M(r, c) = rows[r][c];
    }
    return M;
}

inline std::string format_matrix_text(const MatrixXd& M) {
    std::ostringstream os;
    os.precision(17);
    for (int r = 0; r < M.rows(); ++r) {
        for (int c = 0; c < M.cols(); ++c) os << (c ? " " : "") << M(r, c);
        os << "\n";
    }
    return os.str();
}

}  // namespace gkps
