#pragma once
// Closed-form characteristic functions c(xi) = Tr[D^dagger(xi) O] for Gaussian
// states and finite sums of Gaussian terms, with D(xi) = exp(-i sqrt(2 pi) xi^T J x)
// and [q, p] = i. A term is A exp(-xi^T G xi + b^T xi).

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gkpshadow/errors.hpp"
#include "gkpshadow/symplectic.hpp"

namespace gkps {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

struct GaussianChar {
    int n = 0;
    cd amp{1.0, 0.0};
    MatrixXcd G;  // complex symmetric, Re G positive definite
    VectorXcd b;

    int dim() const { return 2 * n; }

    cd eval(const double* xi) const {
        const int d = dim();
        cd e = 0;
        for (int i = 0; i < d; ++i) {
            cd row = 0;
            for (int j = 0; j < d; ++j) row += G(i, j) * xi[j];
            e += -xi[i] * row + b[i] * xi[i];
        }
        return amp * std::exp(e);
    }
};

/// Linear combination of Gaussian terms.
struct ObservableSpec {
    int n = 0;
    std::vector<GaussianChar> terms;
    std::string label;
    bool hermitian = true;

    int dim() const { return 2 * n; }
    cd eval(const double* xi) const {
        cd s = 0;
        for (const auto& t : terms) s += t.eval(xi);
        return s;
    }
    cd eval(const VectorXd& xi) const {
        if (xi.size() != dim()) throw Error(Errc::DimensionMismatch, "xi length");
        return eval(xi.data());
    }
    cd trace() const {
        cd s = 0;
        for (const auto& t : terms) s += t.amp;
        return s;
    }
};

inline double delta_sq(double beta) { return 2.0 * std::tanh(beta / 2.0); }

/// Integral over R^{2n} of exp(-x^T G x + b^T x) for complex symmetric G with
/// positive definite real part. The square root of det G is continued from the
/// real part along G(t) = Re G + i t Im G.
inline cd gaussian_integral(const MatrixXcd& G, const VectorXcd& b) {
    const int d = static_cast<int>(G.rows());
    const MatrixXd Gr = G.real();
    const MatrixXd Gi = G.imag();
    const Eigen::LLT<MatrixXd> llt(Gr);
    if (llt.info() != Eigen::Success) throw Error(Errc::InadmissibleCovariance, "Re G not positive definite");
    const MatrixXd L = llt.matrixL();
    const MatrixXd Linv = L.inverse();
    const MatrixXd K = Linv * Gi * Linv.transpose();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (K + K.transpose()));
    cd sqrt_det = L.diagonal().prod();
    for (int i = 0; i < d; ++i) sqrt_det *= std::sqrt(cd(1.0, es.eigenvalues()[i]));
    const VectorXcd y = G.partialPivLu().solve(b);
    const cd quad = 0.25 * (b.transpose() * y)(0);
    return std::pow(kPi, d / 2.0) / sqrt_det * std::exp(quad);
}

/// O = exp(-beta N): amp (1-e^{-beta})^{-n}, G = (pi / Delta^2) I.
inline ObservableSpec thermal_char(double beta, int n) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    GaussianChar t;
    t.n = n;
    t.amp = std::pow(1.0 - std::exp(-beta), -n);
    t.G = MatrixXcd::Identity(2 * n, 2 * n) * (kPi / delta_sq(beta));
    t.b = VectorXcd::Zero(2 * n);
    ObservableSpec s;
    s.n = n;
    s.terms = {t};
    s.label = "thermal";
    return s;
}

/// Uncertainty check V + (i/2) J >= 0.
inline bool admissible_covariance(const MatrixXd& V, double tol = 1e-10) {
    const int n = static_cast<int>(V.rows()) / 2;
    const MatrixXcd H = V.cast<cd>() + cd(0, 0.5) * symplectic_form(n).cast<cd>();
    const Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
    return es.eigenvalues().minCoeff() >= -tol;
}

/// Gaussian state with symmetrized covariance V (vacuum V = I/2) and mean xbar
/// in (q, p) units: c(xi) = exp(-pi xi^T J^T V J xi + i sqrt(2 pi) xi^T J xbar).
inline ObservableSpec gaussian_state_char(const MatrixXd& V, const VectorXd& xbar) {
    if (V.rows() != V.cols() || V.rows() % 2 != 0 || xbar.size() != V.rows())
        throw Error(Errc::DimensionMismatch, "covariance / mean shape");
    if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-12 || !admissible_covariance(V))
        throw Error(Errc::InadmissibleCovariance, "V + iJ/2 not positive semidefinite");
    const int n = static_cast<int>(V.rows()) / 2;
    const MatrixXd J = symplectic_form(n);
    GaussianChar t;
    t.n = n;
    t.amp = 1.0;
    t.G = (kPi * J.transpose() * V * J).cast<cd>();
    t.b = cd(0, std::sqrt(2 * kPi)) * (J * xbar).cast<cd>();
    ObservableSpec s;
    s.n = n;
    s.terms = {t};
    s.label = "gaussian-state";
    return s;
}

inline ObservableSpec vacuum_char(int n) {
    auto s = gaussian_state_char(MatrixXd::Identity(2 * n, 2 * n) * 0.5, VectorXd::Zero(2 * n));
    s.label = "vacuum";
    return s;
}

/// Product coherent state |a_1> ... |a_n> with a = (q + i p) / sqrt(2).
inline ObservableSpec coherent_char(const std::vector<cd>& a) {
    const int n = static_cast<int>(a.size());
    VectorXd m(2 * n);
    for (int i = 0; i < n; ++i) {
        m[i] = std::sqrt(2.0) * a[i].real();
        m[n + i] = std::sqrt(2.0) * a[i].imag();
    }
    auto s = gaussian_state_char(MatrixXd::Identity(2 * n, 2 * n) * 0.5, m);
    s.label = "coherent";
    return s;
}

/// Product squeezed vacuum, q-quadrature variance e^{-2 r_i} / 2.
inline ObservableSpec squeezed_char(const std::vector<double>& r) {
    const int n = static_cast<int>(r.size());
    MatrixXd V = MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        V(i, i) = 0.5 * std::exp(-2 * r[i]);
        V(n + i, n + i) = 0.5 * std::exp(2 * r[i]);
    }
    auto s = gaussian_state_char(V, VectorXd::Zero(2 * n));
    s.label = "squeezed";
    return s;
}

/// Normalized thermal state with mean photon number nbar per mode.
inline ObservableSpec thermal_state_char(double nbar, int n) {
    auto s = gaussian_state_char(MatrixXd::Identity(2 * n, 2 * n) * (nbar + 0.5), VectorXd::Zero(2 * n));
    s.label = "thermal-state";
    return s;
}

inline ObservableSpec scaled(ObservableSpec s, cd factor) {
    for (auto& t : s.terms) t.amp *= factor;
    return s;
}

/// Tr[A B] = integral of c_A(xi) c_B(-xi).
inline cd trace_product(const ObservableSpec& A, const ObservableSpec& B) {
    if (A.n != B.n) throw Error(Errc::DimensionMismatch, "mode count");
    cd s = 0;
    for (const auto& s1 : A.terms)
        for (const auto& s2 : B.terms) s += s1.amp * s2.amp * gaussian_integral(s1.G + s2.G, s1.b - s2.b);
    return s;
}

/// Integral of |c|^2, i.e. Tr[O^dagger O].
inline double l2sq(const ObservableSpec& c) {
    cd s = 0;
    for (const auto& s1 : c.terms)
        for (const auto& s2 : c.terms)
            s += s1.amp * std::conj(s2.amp) * gaussian_integral(s1.G + s2.G.conjugate(), s1.b + s2.b.conjugate());
    return s.real();
}

/// Closed form integral of |A exp(-xi^T G xi + b^T xi)| for real xi.
inline double l1_single(const GaussianChar& t) {
    return std::abs(t.amp) * gaussian_integral(t.G.real().cast<cd>(), t.b.real().cast<cd>()).real();
}

/// Radial majorant sum_k C_k exp(-mu_k r^2) of |c| on ||xi|| = r.
struct GaussMajorant {
    double C = 0;
    double mu = 0;
};

inline std::vector<GaussMajorant> majorant(const ObservableSpec& c) {
    std::vector<GaussMajorant> out;
    for (const auto& t : c.terms) {
        const Eigen::SelfAdjointEigenSolver<MatrixXd> es(t.G.real());
        const double mu = es.eigenvalues().minCoeff();
        if (!(mu > 0)) throw Error(Errc::InadmissibleCovariance, "term not integrable");
        const double beta = t.b.real().norm();
        if (beta == 0.0) {
            out.push_back({std::abs(t.amp), mu});
        } else {
            // -mu r^2 + beta r <= -mu r^2 / 2 + beta^2 / (2 mu)
            out.push_back({std::abs(t.amp) * std::exp(beta * beta / (2 * mu)), mu / 2});
        }
    }
    return out;
}

/// Gauss-Hermite nodes and weights for weight e^{-x^2} (Golub-Welsch).
inline void gauss_hermite(int m, std::vector<double>& x, std::vector<double>& w) {
    MatrixXd T = MatrixXd::Zero(m, m);
    for (int i = 1; i < m; ++i) T(i, i - 1) = T(i - 1, i) = std::sqrt(i / 2.0);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
    x.resize(m);
    w.resize(m);
    for (int i = 0; i < m; ++i) {
        x[i] = es.eigenvalues()[i];
        const double v = es.eigenvectors()(0, i);
        w[i] = std::sqrt(kPi) * v * v;
    }
}

struct Norms {
    double l1 = 0;
    double l1_error = 0;
    double l2sq = 0;
    cd trace = 0;
};

/// Tensorized Gauss-Hermite estimate of the L1 norm with doubling order.
inline double l1_quadrature(const ObservableSpec& c, double& err, double rel_target = 1e-8) {
    const int d = c.dim();
    double mu = std::numeric_limits<double>::infinity();
    for (const auto& m : majorant(c)) mu = std::min(mu, m.mu);
    const double muw = 0.5 * mu;
    const double scale = 1.0 / std::sqrt(muw);
    std::vector<int> orders = d <= 2 ? std::vector<int>{16, 32, 64, 128, 256}
                                     : std::vector<int>{8, 12, 16, 24, 32};
    double prev = std::numeric_limits<double>::quiet_NaN();
    err = std::numeric_limits<double>::infinity();
    for (int m : orders) {
        std::vector<double> x, w;
        gauss_hermite(m, x, w);
        // scaled weights w e^{x^2} = 1 / sum_{k<m} phi_k(x)^2 with normalized
        // Hermite functions; eigenvector weights are too inaccurate in the tails
        for (int i = 0; i < m; ++i) {
            double p0 = std::pow(kPi, -0.25) * std::exp(-0.5 * x[i] * x[i]), p1 = 0, acc = p0 * p0;
            for (int k = 0; k + 1 < m; ++k) {
                const double next = std::sqrt(2.0 / (k + 1)) * x[i] * p0 - std::sqrt(double(k) / (k + 1)) * p1;
                p1 = p0;
                p0 = next;
                acc += p0 * p0;
            }
            w[i] = 1.0 / acc;
        }
        std::vector<int> idx(d, 0);
        std::vector<double> xi(d);
        double total = 0;
        while (true) {
            double wt = 1;
            for (int i = 0; i < d; ++i) {
                wt *= w[idx[i]];
                xi[i] = x[idx[i]] * scale;
            }
            if (wt > 0) total += wt * std::abs(c.eval(xi.data()));
            int k = 0;
            while (k < d && ++idx[k] == m) idx[k++] = 0;
            if (k == d) break;
        }
        total *= std::pow(scale, d);
        if (!std::isnan(prev)) {
            err = std::abs(total - prev);
            if (err <= rel_target * std::abs(total)) return total;
        }
        prev = total;
    }
    return prev;
}

inline Norms norms(const ObservableSpec& c) {
    Norms out;
    out.trace = c.trace();
    out.l2sq = l2sq(c);
    if (c.terms.size() == 1) {
        out.l1 = l1_single(c.terms[0]);
    } else {
        out.l1 = l1_quadrature(c, out.l1_error);
        if (!(out.l1_error <= 1e-4 * std::max(1.0, out.l1)))
            throw Error(Errc::QuadratureNotConverged, "L1 quadrature error " + std::to_string(out.l1_error));
    }
    return out;
}

/// Delta^2_lambda = -(2/pi) log |c(lambda)|, +inf when |c| underflows.
inline double effective_squeezing(const ObservableSpec& c, const VectorXd& lambda) {
    const double a = std::abs(c.eval(lambda));
    if (a <= 1e-300) return std::numeric_limits<double>::infinity();
    return std::max(0.0, -(2.0 / kPi) * std::log(a));
}

/// Characteristic function of Tr over the modes not in `keep`: restriction
/// of c to xi supported on the kept modes.
inline ObservableSpec marginal(const ObservableSpec& c, const std::vector<int>& keep) {
    const int n = c.n;
    const int k = static_cast<int>(keep.size());
    std::vector<int> idx;
    for (int m : keep) idx.push_back(m);
    for (int m : keep) idx.push_back(n + m);
    ObservableSpec out;
    out.n = k;
    out.label = c.label;
    out.hermitian = c.hermitian;
    for (const auto& t : c.terms) {
        GaussianChar g;
        g.n = k;
        g.amp = t.amp;
        g.G.resize(2 * k, 2 * k);
        g.b.resize(2 * k);
        for (int i = 0; i < 2 * k; ++i) {
            g.b[i] = t.b[idx[i]];
            for (int j = 0; j < 2 * k; ++j) g.G(i, j) = t.G(idx[i], idx[j]);
        }
        out.terms.push_back(g);
    }
    return out;
}

/// Splits each term into single-mode factors when G has no cross-mode
/// couplings. The term amplitude is carried by mode 0.
inline std::optional<std::vector<std::vector<GaussianChar>>> factorize(const ObservableSpec& c) {
    const int n = c.n;
    std::vector<std::vector<GaussianChar>> out;
    for (const auto& t : c.terms) {
        for (int i = 0; i < 2 * n; ++i)
            for (int j = 0; j < 2 * n; ++j)
                if (i % n != j % n && std::abs(t.G(i, j)) != 0.0) return std::nullopt;
        std::vector<GaussianChar> modes;
        for (int m = 0; m < n; ++m) {
            GaussianChar g;
            g.n = 1;
            g.amp = m == 0 ? t.amp : cd(1.0, 0.0);
            g.G.resize(2, 2);
            g.b.resize(2);
            const int id[2] = {m, n + m};
            for (int i = 0; i < 2; ++i) {
                g.b[i] = t.b[id[i]];
                for (int j = 0; j < 2; ++j) g.G(i, j) = t.G(id[i], id[j]);
            }
            modes.push_back(g);
        }
        out.push_back(modes);
    }
    return out;
}

/// Tensor product of single-mode specs (all terms multiplied out).
inline ObservableSpec tensor_product(const std::vector<ObservableSpec>& modes) {
    ObservableSpec acc = modes.at(0);
    for (std::size_t k = 1; k < modes.size(); ++k) {
        const ObservableSpec& m = modes[k];
        ObservableSpec next;
        next.n = acc.n + m.n;
        next.label = acc.label;
        next.hermitian = acc.hermitian && m.hermitian;
        const int na = acc.n, nb = m.n, nn = next.n;
        // index maps into the combined (q..q, p..p) ordering
        std::vector<int> ia, ib;
        for (int i = 0; i < na; ++i) ia.push_back(i);
        for (int i = 0; i < na; ++i) ia.push_back(nn + i);
        for (int i = 0; i < nb; ++i) ib.push_back(na + i);
        for (int i = 0; i < nb; ++i) ib.push_back(nn + na + i);
        for (const auto& ta : acc.terms)
            for (const auto& tb : m.terms) {
                GaussianChar g;
                g.n = nn;
                g.amp = ta.amp * tb.amp;
                g.G = MatrixXcd::Zero(2 * nn, 2 * nn);
                g.b = VectorXcd::Zero(2 * nn);
                for (int i = 0; i < 2 * na; ++i) {
                    g.b[ia[i]] = ta.b[i];
                    for (int j = 0; j < 2 * na; ++j) g.G(ia[i], ia[j]) = ta.G(i, j);
                }
                for (int i = 0; i < 2 * nb; ++i) {
                    g.b[ib[i]] = tb.b[i];
                    for (int j = 0; j < 2 * nb; ++j) g.G(ib[i], ib[j]) = tb.G(i, j);
                }
                next.terms.push_back(g);
            }
        acc = next;
    }
    return acc;
}

// Sandwiches R rho R with R = exp(-beta N), used for regularized pointers.

/// R |a><a| R = e^{-|a|^2 (1 - e^{-2 beta})} |a e^{-beta}><a e^{-beta}|.
inline ObservableSpec regularized_coherent_char(const std::vector<cd>& a, double beta) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    std::vector<cd> s;
    double w = 0;
    for (const cd& x : a) {
        s.push_back(x * std::exp(-beta));
        w += std::norm(x);
    }
    auto c = scaled(coherent_char(s), std::exp(-w * (1 - std::exp(-2 * beta))));
    c.label = "regularized-coherent";
    return c;
}

/// R rho_th R for the thermal state (1-q)^n q^N with q = nbar / (1 + nbar).
inline ObservableSpec regularized_thermal_state_char(double nbar, int n, double beta) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    if (nbar <= 0) return vacuum_char(n);  // R leaves the vacuum unchanged
    const double q = nbar / (1 + nbar);
    auto c = scaled(thermal_char(-std::log(q) + 2 * beta, n), std::pow(1 - q, n));
    c.label = "regularized-thermal-state";
    return c;
}

}  // namespace gkps
