#pragma once
// Truncated lattice sums with analytic tail bounds: pointer overlaps
// <X|A|X>, theta and weighted theta series, and the thermal GKP expectation.
//
// Tail bound used everywhere: with s a lower bound on the shortest vector,
// balls of radius s/2 around lattice points are disjoint, so
// #{lambda : ||lambda|| <= r} <= (1 + 2r/s)^{2n}. Summing a radial majorant
// F(r) >= |f| over shells (R + kh, R + (k+1)h] gives
//   sum_{||lambda|| > R} |f(lambda)| <= sum_k (1 + 2(R+(k+1)h)/s)^{2n} F(R + kh).

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <vector>

#include "gkpshadow/charfun.hpp"
#include "gkpshadow/symplectic.hpp"

namespace gkps {

/// Sign sigma of the alpha twist e^{i sigma 2 pi alpha^T J lambda}. Fixed by the
/// Fock-oracle calibration test (tests/test_oracle_calibration.cpp).
inline constexpr int kTwistSign = +1;

struct TruncatedSum {
    cd value = 0;
    double radius = 0;
    double tail_bound = 0;
    std::size_t terms_used = 0;
};

inline double majorant_at(const std::vector<GaussMajorant>& maj, double r) {
    double s = 0;
    for (const auto& m : maj) s += m.C * std::exp(-m.mu * r * r);
    return s;
}

/// Rigorous tail bound over a specific lattice (see header comment).
inline double lattice_tail_bound(const std::vector<GaussMajorant>& maj, double R, double s_lb, int d) {
    if (maj.empty()) return 0.0;
    const double h = 0.25;
    const double s = std::max(s_lb, 1e-12);
    double total = 0;
    double mu_min = std::numeric_limits<double>::infinity();
    for (const auto& m : maj) mu_min = std::min(mu_min, m.mu);
    for (int k = 0; k < 100000; ++k) {
        const double r0 = R + k * h;
        const double r1 = r0 + h;
        const double term = std::pow(1.0 + 2.0 * r1 / s, d) * majorant_at(maj, r0);
        total += term;
        // past the peak of r^d e^{-mu r^2} the terms decrease geometrically
        if (r0 * r0 * mu_min > d && term <= 1e-18 * total) break;
        if (term == 0.0 && r0 * r0 * mu_min > d) break;
    }
    return total;
}

/// Smallest R on a 1/8 grid with lattice_tail_bound(R) <= tol.
inline double lattice_radius(const std::vector<GaussMajorant>& maj, double s_lb, int d, double tol) {
    if (!(tol < std::numeric_limits<double>::infinity())) return 0.0;
    double R = 0.125;
    while (R < 400.0 && lattice_tail_bound(maj, R, s_lb, d) > tol) R += 0.125;
    return R;
}

/// Haar-average tail: by the mean value formula the expected omitted mass over
/// random unimodular lattices is the integral of the majorant outside B(R).
inline double mean_tail(const std::vector<GaussMajorant>& maj, double R, int d) {
    const int n = d / 2;
    double total = 0;
    for (const auto& m : maj) {
        const double z = m.mu * R * R;
        double q = 0, term = 1;
        for (int k = 0; k < n; ++k) {
            if (k > 0) term *= z / k;
            q += term;
        }
        total += m.C * std::pow(kPi / m.mu, n) * std::exp(-z) * q;
    }
    return total;
}

/// Smallest R with mean_tail(R) <= tol (bisection); 0 for an infinite tolerance.
inline double truncation_radius(const ObservableSpec& c, double tol) {
    if (!(tol < std::numeric_limits<double>::infinity())) return 0.0;
    const auto maj = majorant(c);
    if (mean_tail(maj, 0.0, c.dim()) <= tol) return 0.0;
    double lo = 0, hi = 1;
    while (mean_tail(maj, hi, c.dim()) > tol) hi *= 2;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_tail(maj, mid, c.dim()) > tol ? lo : hi) = mid;
    }
    return hi;
}

/// Precomputed R(s) for one majorant, looked up conservatively by the
/// shortest-vector lower bound.
class RadiusTable {
public:
    RadiusTable() = default;
    RadiusTable(std::vector<GaussMajorant> maj, int d, double tol) : maj_(std::move(maj)), d_(d), tol_(tol) {
        for (int j = 0; j <= kSteps; ++j) {
            const double s = std::pow(10.0, kLogMin + (kLogMax - kLogMin) * j / kSteps);
            s_.push_back(s);
            R_.push_back(lattice_radius(maj_, s, d_, tol_));
        }
    }
    double radius(double s_lb) const {
        if (s_lb < s_.front()) return lattice_radius(maj_, s_lb, d_, tol_);
        std::size_t j = static_cast<std::size_t>(
            std::floor((std::log10(s_lb) - kLogMin) / (kLogMax - kLogMin) * kSteps));
        j = std::min(j, s_.size() - 1);
        while (j > 0 && s_[j] > s_lb) --j;
        return R_[j];
    }
    double tail(double R, double s_lb) const { return lattice_tail_bound(maj_, R, s_lb, d_); }
    const std::vector<GaussMajorant>& maj() const { return maj_; }

private:
    static constexpr double kLogMin = -4.0, kLogMax = 0.5;
    static constexpr int kSteps = 180;
    std::vector<GaussMajorant> maj_;
    std::vector<double> s_, R_;
    int d_ = 0;
    double tol_ = 0;
};

/// Hot-path pointer overlap for a Hermitian spec over a half point set:
/// value(alpha) = w0 + 2 Re sum_k w_k e^{i sigma 2 pi alpha . (J lambda_k)}.
struct PointerSum {
    int dim = 0;
    cd w0 = 0;
    std::vector<cd> w;
    std::vector<double> jv;
    double tail = 0;
    double abs_sum = 0;  // |w0| + 2 sum |w_k|

    void build(const PointSet& ps, const ObservableSpec& c, double tail_bound) {
        dim = ps.dim;
        w0 = c.trace();
        w.resize(ps.size());
        jv = ps.jvec;
        abs_sum = std::abs(w0);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            w[k] = static_cast<double>(ps.sign[k]) * c.eval(ps.v(k));
            abs_sum += 2 * std::abs(w[k]);
        }
        tail = tail_bound;
    }

    double eval(const double* alpha) const {
        double s = w0.real();
        const double f = 2 * kPi * kTwistSign;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double* j = jv.data() + k * dim;
            double dot = 0;
            for (int i = 0; i < dim; ++i) dot += alpha[i] * j[i];
            const double th = f * dot;
            s += 2 * (w[k].real() * std::cos(th) - w[k].imag() * std::sin(th));
        }
        return s;
    }
};

/// Full (both signs) pointer overlap with realness and positivity checks.
inline TruncatedSum pointer_overlap(const SymplecticBasis& basis, const VectorXd& alpha, const ObservableSpec& c,
                                    double tol = 1e-10, bool is_state = false) {
    if (alpha.size() != basis.dim() || c.dim() != basis.dim())
        throw Error(Errc::DimensionMismatch, "alpha / spec dimension");
    if (!in_cell(basis, alpha)) throw Error(Errc::NotInCell, "alpha outside the centered cell");
    const auto maj = majorant(c);
    const double s = basis.shortest_lower_bound();
    const double R = lattice_radius(maj, s, basis.dim(), tol);
    const PointSet ps = enumerate_points(basis, R, true, false);
    TruncatedSum out;
    out.radius = R;
    out.tail_bound = lattice_tail_bound(maj, R, s, basis.dim());
    out.terms_used = ps.size() + 1;
    cd v = c.trace();
    const double f = 2 * kPi * kTwistSign;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        double dot = 0;
        for (int i = 0; i < ps.dim; ++i) dot += alpha[i] * ps.jv(k)[i];
        v += static_cast<double>(ps.sign[k]) * std::polar(1.0, f * dot) * c.eval(ps.v(k));
    }
    out.value = v;
    const double slack = std::max(1e-9, out.tail_bound) * std::max(1.0, std::abs(v.real()));
    if (c.hermitian && std::abs(v.imag()) > slack)
        throw Error(Errc::ImaginaryResidualTooLarge, std::to_string(v.imag()));
    if (is_state && v.real() < -std::max(1e-9, out.tail_bound))
        throw Error(Errc::NegativeBeyondTail, std::to_string(v.real()));
    return out;
}

/// Sum of e^{-pi s ||lambda||^2} over the lattice.
inline TruncatedSum theta(const SymplecticBasis& basis, double s, double tol = 1e-12) {
    if (!(s > 0)) throw Error(Errc::InvalidArgument, "theta needs s > 0");
    const std::vector<GaussMajorant> maj{{1.0, kPi * s}};
    const double sl = basis.shortest_lower_bound();
    const double R = lattice_radius(maj, sl, basis.dim(), tol);
    const PointSet ps = enumerate_points(basis, R, true, false);
    TruncatedSum out;
    out.radius = R;
    out.tail_bound = lattice_tail_bound(maj, R, sl, basis.dim());
    out.terms_used = ps.size() + 1;
    double v = 1.0;
    for (std::size_t k = 0; k < ps.size(); ++k) v += std::exp(-kPi * s * ps.norm2[k]);
    out.value = v;
    return out;
}

/// Polynomial in d real variables: sum of coeff * prod x_i^{e_i}.
struct Polynomial {
    int vars = 0;
    std::vector<std::pair<std::vector<int>, cd>> terms;

    int degree() const {
        int deg = 0;
        for (const auto& t : terms) {
            int s = 0;
            for (int e : t.first) s += e;
            deg = std::max(deg, s);
        }
        return deg;
    }
    static Polynomial one(int vars) { return {vars, {{std::vector<int>(vars, 0), cd(1.0, 0.0)}}}; }

    template <class T>
    cd eval(const T* x) const {
        const int deg = degree();
        // power table per variable, then monomials by lookup
        std::vector<std::vector<cd>> pw(vars, std::vector<cd>(deg + 1, cd(1.0, 0.0)));
        for (int i = 0; i < vars; ++i)
            for (int k = 1; k <= deg; ++k) pw[i][k] = pw[i][k - 1] * cd(x[i]);
        cd s = 0;
        for (const auto& t : terms) {
            cd m = t.second;
            for (int i = 0; i < vars; ++i) m *= pw[i][t.first[i]];
            s += m;
        }
        return s;
    }
};

inline constexpr int kDegreeCap = 16;

/// Radial majorant coefficients: |P(x)| <= sum_k w_k ||x||^k.
inline std::vector<double> radial_majorant(const Polynomial& P) {
    std::vector<double> w(P.degree() + 1, 0.0);
    for (const auto& t : P.terms) {
        int s = 0;
        for (int e : t.first) s += e;
        w[s] += std::abs(t.second);
    }
    return w;
}

/// Gaussian majorant of sum_k w_k r^k e^{-pi s r^2}.
inline std::vector<GaussMajorant> radial_weight_majorant(const std::vector<double>& w, double s) {
    double C = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double kk = static_cast<double>(k);
        const double peak = k == 0 ? 1.0 : std::pow(kk / (kPi * s), kk / 2) * std::exp(-kk / 2);
        C += w[k] * peak;
    }
    return {{C, kPi * s / 2}};
}

/// sum_lambda w(||lambda||) e^{-pi s ||lambda||^2} for a radial polynomial weight.
inline TruncatedSum weighted_theta_radial(const SymplecticBasis& basis, const std::vector<double>& w, double s,
                                          double tol = 1e-12) {
    const auto maj = radial_weight_majorant(w, s);
    const double sl = basis.shortest_lower_bound();
    const double R = lattice_radius(maj, sl, basis.dim(), tol);
    const PointSet ps = enumerate_points(basis, R, true, false);
    TruncatedSum out;
    out.radius = R;
    out.tail_bound = lattice_tail_bound(maj, R, sl, basis.dim());
    out.terms_used = ps.size() + 1;
    double v = w.empty() ? 0.0 : w[0];
    for (std::size_t k = 0; k < ps.size(); ++k) {
        const double r = std::sqrt(ps.norm2[k]);
        double p = 0, rk = 1;
        for (double c : w) {
            p += c * rk;
            rk *= r;
        }
        v += p * std::exp(-kPi * s * ps.norm2[k]);
    }
    out.value = v;
    return out;
}

/// sum_lambda P(lambda) e^{-pi s ||lambda||^2}.
inline TruncatedSum weighted_theta(const SymplecticBasis& basis, const Polynomial& P, double s, double tol = 1e-12) {
    if (P.degree() > kDegreeCap) throw Error(Errc::DegreeCap, "polynomial degree above cap");
    if (P.vars != basis.dim()) throw Error(Errc::DimensionMismatch, "polynomial variables");
    const auto maj = radial_weight_majorant(radial_majorant(P), s);
    const double sl = basis.shortest_lower_bound();
    const double R = lattice_radius(maj, sl, basis.dim(), tol);
    const PointSet ps = enumerate_points(basis, R, true, false);
    TruncatedSum out;
    out.radius = R;
    out.tail_bound = lattice_tail_bound(maj, R, sl, basis.dim());
    out.terms_used = ps.size() + 1;
    const std::vector<double> zero(basis.dim(), 0.0);
    cd v = P.eval(zero.data());
    for (std::size_t k = 0; k < ps.size(); ++k) v += P.eval(ps.v(k)) * std::exp(-kPi * s * ps.norm2[k]);
    out.value = v;
    return out;
}

namespace detail {

inline double abs_normal_moment(int j) {
    return std::pow(2.0, j / 2.0) * std::tgamma((j + 1) / 2.0) / std::sqrt(kPi);
}
inline double normal_moment(int j) {
    if (j % 2) return 0.0;
    double m = 1;
    for (int k = j - 1; k > 1; k -= 2) m *= k;
    return m;
}
inline double binom(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// E[P(Y)] for Y ~ N(m, sigma^2 I) with complex mean m.
inline cd gaussian_expectation(const Polynomial& P, const std::vector<cd>& m, double sigma) {
    cd s = 0;
    for (const auto& t : P.terms) {
        cd prod = t.second;
        for (int i = 0; i < P.vars; ++i) {
            const int e = t.first[i];
            cd f = 0;
            for (int j = 0; j <= e; j += 2)
                f += binom(e, j) * std::pow(m[i], e - j) * std::pow(sigma, j) * normal_moment(j);
            prod *= f;
        }
        s += prod;
    }
    return s;
}

}  // namespace detail

struct ThermalGkpResult {
    TruncatedSum sum;
    double majorant_bound = 0;  // (1-e^{-beta})^{-n} * weighted theta of the radial majorant
};

/// <Lambda| P(x) e^{-beta N} |Lambda> for a Weyl-ordered polynomial P:
///   (1-e^{-beta})^{-n} sum_lambda e^{i Phi} e^{-pi ||lambda||^2 / Delta^2} E[P(Y_lambda)],
/// Y_lambda ~ N(-sqrt(pi/2) lambda + i sqrt(2 pi) Delta^{-2} J lambda, Delta^{-2} I).
/// For P = 1 this is Tr[Pi_Lambda e^{-beta N}].
inline ThermalGkpResult thermal_gkp_expectation(const SymplecticBasis& basis, const Polynomial& P, double beta,
                                                double tol = 1e-12) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    if (P.degree() > kDegreeCap) throw Error(Errc::DegreeCap, "polynomial degree above cap");
    if (P.vars != basis.dim()) throw Error(Errc::DimensionMismatch, "polynomial variables");
    const int n = basis.n();
    const int d = basis.dim();
    const double D2 = delta_sq(beta);
    const double s = 1.0 / D2;
    const double sigma = 1.0 / std::sqrt(D2);
    const double pref = std::pow(1.0 - std::exp(-beta), -n);
    const double kappa = std::sqrt(kPi / 2 + 2 * kPi / (D2 * D2));

    // radial majorant of |E[P(Y)]| in r = ||lambda||
    std::vector<double> w(P.degree() + 1, 0.0);
    for (const auto& t : P.terms) {
        std::vector<double> poly{std::abs(t.second)};
        for (int i = 0; i < P.vars; ++i) {
            const int e = t.first[i];
            std::vector<double> f(e + 1, 0.0);  // coefficients of r^k
            for (int j = 0; j <= e; ++j)
                f[e - j] += detail::binom(e, j) * std::pow(kappa, e - j) * std::pow(sigma, j) *
                            detail::abs_normal_moment(j);
            std::vector<double> next(poly.size() + e, 0.0);
            for (std::size_t a = 0; a < poly.size(); ++a)
                for (int b = 0; b <= e; ++b) next[a + b] += poly[a] * f[b];
            poly = next;
        }
        for (std::size_t k = 0; k < poly.size() && k < w.size(); ++k) w[k] += poly[k];
    }
    const auto maj = radial_weight_majorant(w, s);
    const double sl = basis.shortest_lower_bound();
    const double R = lattice_radius(maj, sl, d, tol);
    const PointSet ps = enumerate_points(basis, R, true, false);
    auto mean_of = [&](const double* lam) {
        std::vector<cd> m(d);
        for (int i = 0; i < n; ++i) {
            const double jq = lam[n + i], jp = -lam[i];
            m[i] = cd(-std::sqrt(kPi / 2) * lam[i], std::sqrt(2 * kPi) / D2 * jq);
            m[n + i] = cd(-std::sqrt(kPi / 2) * lam[n + i], std::sqrt(2 * kPi) / D2 * jp);
        }
        return m;
    };
    const std::vector<double> zero(d, 0.0);
    cd v = detail::gaussian_expectation(P, mean_of(zero.data()), sigma);
    for (std::size_t k = 0; k < ps.size(); ++k)
        v += static_cast<double>(ps.sign[k]) * std::exp(-kPi * s * ps.norm2[k]) *
             detail::gaussian_expectation(P, mean_of(ps.v(k)), sigma);
    ThermalGkpResult out;
    out.sum.value = pref * v;
    out.sum.radius = R;
    out.sum.tail_bound = pref * lattice_tail_bound(maj, R, sl, d);
    out.sum.terms_used = ps.size() + 1;
    out.majorant_bound = pref * weighted_theta_radial(basis, w, s, tol).value.real();
    return out;
}

}  // namespace gkps
