#pragma once
// Monte-Carlo checks of the design and moment identities of the random GKP
// ensemble: mean-value formula, frame potentials, coherent-basis moments and
// lattice counting statistics.

#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gkpshadow/charfun.hpp"
#include "gkpshadow/lattice_random.hpp"
#include "gkpshadow/lattice_sum.hpp"
#include "gkpshadow/shadow.hpp"

namespace gkps {

inline constexpr int kVerdictBatches = 100;

struct McVerdict {
    std::string name;
    double estimate = 0;
    double std_error = 0;
    double target = 0;
    double z_score = 0;
    std::uint64_t samples = 0;
    double threshold = 3.0;
    bool pass = false;
    std::string caveat;  // non-empty for approximate samplers
};

/// Verdict from per-sample values: estimate is the mean, the standard error
/// comes from `batches` consecutive batch means.
inline McVerdict make_verdict(std::string name, const std::vector<double>& values, double target,
                              double threshold = 3.0, int batches = kVerdictBatches) {
    if (values.empty()) throw Error(Errc::EmptyInput, "no samples");
    McVerdict v;
    v.name = std::move(name);
    v.samples = values.size();
    v.target = target;
    v.threshold = threshold;
    const std::size_t nb = std::min<std::size_t>(std::max(batches, 30), values.size());
    const std::size_t bs = values.size() / nb;
    std::vector<double> means(nb);
    for (std::size_t b = 0; b < nb; ++b)
        means[b] = std::accumulate(values.begin() + b * bs, values.begin() + (b + 1) * bs, 0.0) / bs;
    v.estimate = std::accumulate(means.begin(), means.end(), 0.0) / nb;
    double ss = 0;
    for (double m : means) ss += (m - v.estimate) * (m - v.estimate);
    v.std_error = nb > 1 ? std::sqrt(ss / (nb - 1) / nb) : 0.0;
    if (v.std_error > 0) {
        v.z_score = (v.estimate - target) / v.std_error;
    } else {
        v.z_score = v.estimate == target ? 0.0 : std::numeric_limits<double>::infinity();
    }
    v.pass = std::abs(v.z_score) <= threshold;
    return v;
}

/// Runs fn(rng, out) `samples` times over sharded streams; out has `width`
/// slots. Returns per-slot sample columns merged in shard order.
template <class F>
std::vector<std::vector<double>> mc_collect(std::uint64_t samples, int width, std::uint64_t seed, unsigned shards,
                                            std::uint64_t tag, F fn) {
    shards = std::max(1u, shards);
    std::vector<std::vector<std::vector<double>>> part(shards, std::vector<std::vector<double>>(width));
    run_sharded(samples, shards, [&](unsigned s, std::uint64_t b, std::uint64_t e) {
        Rng rng = make_stream(seed, s, tag);
        std::vector<double> out(width);
        for (std::uint64_t k = b; k < e; ++k) {
            fn(rng, out.data());
            for (int i = 0; i < width; ++i) part[s][i].push_back(out[i]);
        }
    });
    std::vector<std::vector<double>> cols(width);
    for (unsigned s = 0; s < shards; ++s)
        for (int i = 0; i < width; ++i) cols[i].insert(cols[i].end(), part[s][i].begin(), part[s][i].end());
    return cols;
}

/// Lattice draw used by every verifier: exact Y_1 for n = 1, otherwise the
/// approximate sampler (callers tag the verdict).
inline LatticeSample verifier_lattice(int n, int approx_steps, Rng& rng) {
    return n == 1 ? sample_y1(rng) : sample_yn_approx(n, approx_steps, rng);
}

inline const char* kApproxCaveat = "approx-Yn sampler: not provably Haar";

/// Uniform point of the centered cell.
inline VectorXd uniform_in_cell(const SymplecticBasis& b, Rng& rng) {
    VectorXd u(b.dim());
    for (int i = 0; i < b.dim(); ++i) u[i] = uniform01(rng) - 0.5;
    return b.M().transpose() * u;
}

// ---------------------------------------------------------------- mean value

/// Lattice average of F(L) = sum_{l != 0} Re f(l) against the integral of f.
inline McVerdict mean_value_mc(const ObservableSpec& f, std::uint64_t samples, std::uint64_t seed, unsigned shards = 1,
                               double tol = 1e-12, int approx_steps = 20) {
    const int n = f.n;
    cd target = 0;
    for (const auto& t : f.terms) target += t.amp * gaussian_integral(t.G, t.b);
    const RadiusTable tab(majorant(f), 2 * n, tol);
    auto cols = mc_collect(samples, 1, seed, shards, 101, [&](Rng& rng, double* out) {
        const LatticeSample L = verifier_lattice(n, approx_steps, rng);
        const double R = tab.radius(L.basis.shortest_lower_bound());
        const PointSet ps = enumerate_points(L.basis, R, false, false);
        double s = 0;
        for (std::size_t k = 0; k < ps.size(); ++k) s += f.eval(ps.v(k)).real();
        out[0] = s;
    });
    McVerdict v = make_verdict("meanvalue", cols[0], target.real());
    if (n > 1) v.caveat = kApproxCaveat;
    return v;
}

// ---------------------------------------------------------------- frame potentials

struct FrameResult {
    int t = 0;
    double beta = 0;
    McVerdict X, W, F_design, F_off;  // F at a_t and at a reference a != a_t
    double tr_r2 = 0, tr_r4 = 0;
};

/// Tr[D(l) R D(l') R] for R = exp(-beta N):
/// Tr[R^2] exp(-a |l + l'|^2 / 2 - pi^2 |l - l'|^2 / (8 a)), a = pi / Delta^2(beta).
inline double frame_kernel(const double* l, const double* lp, int d, double beta) {
    const double a = kPi / delta_sq(beta);
    double s2 = 0, d2 = 0;
    for (int i = 0; i < d; ++i) {
        s2 += (l[i] + lp[i]) * (l[i] + lp[i]);
        d2 += (l[i] - lp[i]) * (l[i] - lp[i]);
    }
    const int n = d / 2;
    const double tr2 = std::pow(1 - std::exp(-2 * beta), -n);
    return tr2 * std::exp(-a * s2 / 2 - kPi * kPi * d2 / (8 * a));
}

/// t = 2: W from paired independent lattices, sum_{l, l'} K(l, l')^2 (the
/// alpha averages are done in closed form); X from sum_l |c_{R^2}(l)|^2.
/// t = 1: alpha, alpha' sampled uniformly, X = <X|R^2|X>, W = |<X|R|Y>|^2.
/// radius_scale > 1 widens all truncation radii (tail-honesty check).
inline FrameResult frame_potential_mc(int t, double beta, std::uint64_t samples, std::uint64_t seed,
                                      unsigned shards = 1, double radius_scale = 1.0) {
    if (t != 1 && t != 2) throw Error(Errc::InvalidArgument, "frame potential t in {1, 2}");
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    const int d = 2;
    FrameResult res;
    res.t = t;
    res.beta = beta;
    res.tr_r2 = 1 / (1 - std::exp(-2 * beta));
    res.tr_r4 = 1 / (1 - std::exp(-4 * beta));
    const double a = kPi / delta_sq(beta);
    const double tol = 1e-12;
    // |K|^p <= C exp(-p m (|l|^2 + |l'|^2)), m = min(a / 2, pi^2 / (8 a)) * 2
    const double m = 2 * std::min(a / 2, kPi * kPi / (8 * a));
    const double p = t == 2 ? 2.0 : 1.0;
    const double C = std::pow(res.tr_r2, p);
    const std::vector<GaussMajorant> maj{{C, p * m}};
    // pairs with p a |l + l'|^2 / 2 above 40 contribute below e^{-40} C
    const double pair_cut2 = 2 * 40.0 / (p * a) * radius_scale * radius_scale;
    const ObservableSpec r2 = thermal_char(2 * beta, 1);
    const ObservableSpec r2sq_maj = r2;  // |c_{R^2}|^2 is Gaussian with twice the exponent
    const RadiusTable x_tab(majorant(r2), d, tol);

    auto cols = mc_collect(samples, 2, seed, shards, 200 + t, [&](Rng& rng, double* out) {
        const LatticeSample L1 = sample_y1(rng);
        const LatticeSample L2 = sample_y1(rng);
        const double R1 = radius_scale * lattice_radius(maj, L1.basis.shortest_lower_bound(), d, tol);
        const double R2 = radius_scale * lattice_radius(maj, L2.basis.shortest_lower_bound(), d, tol);
        const PointSet P1 = enumerate_points(L1.basis, R1, true, false);
        const PointSet P2 = enumerate_points(L2.basis, R2, true, false);
        const double zero[2] = {0, 0};
        auto pt = [&](const PointSet& P, std::size_t k) { return k == P.size() ? zero : P.v(k); };
        auto sg = [&](const PointSet& P, std::size_t k) { return k == P.size() ? 1.0 : double(P.sign[k]); };
        if (t == 2) {
            double W = 0;
            for (std::size_t i = 0; i <= P1.size(); ++i) {
                const double* l = pt(P1, i);
                for (std::size_t j = 0; j <= P2.size(); ++j) {
                    const double* lp = pt(P2, j);
                    const double s0 = l[0] + lp[0], s1 = l[1] + lp[1];
                    if (s0 * s0 + s1 * s1 > pair_cut2) continue;
                    const double K = frame_kernel(l, lp, d, beta);
                    W += K * K;
                }
            }
            const double Rx = radius_scale * x_tab.radius(L1.basis.shortest_lower_bound());
            const PointSet Px = enumerate_points(L1.basis, Rx, false, false);
            double X = res.tr_r2 * res.tr_r2;
            for (std::size_t k = 0; k < Px.size(); ++k) X += std::norm(r2.eval(Px.v(k)));
            out[0] = X;
            out[1] = W;
        } else {
            const VectorXd al = uniform_in_cell(L1.basis, rng);
            const VectorXd ap = uniform_in_cell(L2.basis, rng);
            auto twist = [&](const VectorXd& alpha, const double* l) {
                // alpha^T J l for n = 1
                return alpha[0] * l[1] - alpha[1] * l[0];
            };
            double W = 0;
            for (std::size_t i = 0; i <= P1.size(); ++i) {
                const double* l = pt(P1, i);
                const double th1 = twist(al, l);
                for (std::size_t j = 0; j <= P2.size(); ++j) {
                    const double* lp = pt(P2, j);
                    const double s0 = l[0] + lp[0], s1 = l[1] + lp[1];
                    if (s0 * s0 + s1 * s1 > pair_cut2) continue;
                    const double th = -2 * kPi * (th1 + twist(ap, lp));
                    W += sg(P1, i) * sg(P2, j) * std::cos(th) * frame_kernel(l, lp, d, beta);
                }
            }
            const double Rx = radius_scale * x_tab.radius(L1.basis.shortest_lower_bound());
            const PointSet Px = enumerate_points(L1.basis, Rx, true, true);
            PointerSum ps;
            ps.build(Px, r2, 0.0);
            out[0] = ps.eval(al.data());
            out[1] = W;
        }
    });
    (void)r2sq_maj;
    const double a_t = t == 2 ? 2.0 : 1.0;
    const double pi_t = t == 2 ? 0.5 * (res.tr_r2 * res.tr_r2 + res.tr_r4) : res.tr_r2;
    const double x_target = t == 2 ? res.tr_r2 * res.tr_r2 + res.tr_r4 : res.tr_r2;
    const double w_target = t == 2 ? 2 * res.tr_r4 + 2 * res.tr_r2 * res.tr_r2 : res.tr_r2;
    auto F = [&](double at) {
        std::vector<double> v(cols[0].size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = cols[1][k] - 2 * at * cols[0][k] + at * at * pi_t;
        return v;
    };
    const double a_off = t == 2 ? 1.0 : 0.5;
    res.X = make_verdict("frame.X" + std::to_string(t), cols[0], x_target);
    res.W = make_verdict("frame.W" + std::to_string(t), cols[1], w_target);
    res.F_design = make_verdict("frame.F" + std::to_string(t) + "(a_t)", F(a_t), 0.0);
    res.F_off = make_verdict("frame.F" + std::to_string(t) + "(a_off)", F(a_off), (a_off - a_t) * (a_off - a_t) * pi_t);
    return res;
}

// ---------------------------------------------------------------- coherent moments

/// Coherent amplitude a as the phase-space vector (Re a, Im a) / sqrt(pi).
inline VectorXd coherent_shift(cd a) {
    VectorXd v(2);
    v << a.real() / std::sqrt(kPi), a.imag() / std::sqrt(kPi);
    return v;
}

inline cd coherent_overlap(cd a, cd b) { return std::exp(-std::norm(a) / 2 - std::norm(b) / 2 + std::conj(a) * b); }

/// t = 1: alpha-uniform pointer overlap of |a_1>, target 1.
/// t = 2: sum_l e^{2 pi i l^T J d} e^{-pi |l|^2}, d = (a_2 - a_1)/sqrt(pi), target 1 + |<a_1|a_2>|^2.
inline McVerdict coherent_moment_mc(int t, const std::vector<cd>& alphas, std::uint64_t samples, std::uint64_t seed,
                                    unsigned shards = 1) {
    if (t != 1 && t != 2) throw Error(Errc::InvalidArgument, "verdicts exist for t in {1, 2}; t = 3 is a probe");
    if (static_cast<int>(alphas.size()) != t) throw Error(Errc::DimensionMismatch, "need t coherent labels");
    for (const cd& a : alphas)
        if (std::abs(a) > 3) throw Error(Errc::InvalidArgument, "|alpha| <= 3");
    if (t == 1) {
        const ObservableSpec c = coherent_char({alphas[0]});
        const RadiusTable tab(majorant(c), 2, 1e-12);
        auto cols = mc_collect(samples, 1, seed, shards, 301, [&](Rng& rng, double* out) {
            const LatticeSample L = sample_y1(rng);
            const PointSet ps = enumerate_points(L.basis, tab.radius(L.basis.shortest_lower_bound()), true, true);
            PointerSum s;
            s.build(ps, c, 0.0);
            const VectorXd al = uniform_in_cell(L.basis, rng);
            out[0] = s.eval(al.data());
        });
        return make_verdict("coherent.t1", cols[0], 1.0);
    }
    const VectorXd dv = coherent_shift(alphas[1] - alphas[0]);
    const std::vector<GaussMajorant> maj{{1.0, kPi}};
    auto cols = mc_collect(samples, 1, seed, shards, 302, [&](Rng& rng, double* out) {
        const LatticeSample L = sample_y1(rng);
        const PointSet ps =
            enumerate_points(L.basis, lattice_radius(maj, L.basis.shortest_lower_bound(), 2, 1e-12), false, true);
        double s = 1.0;
        for (std::size_t k = 0; k < ps.size(); ++k) {
            const double* l = ps.v(k);
            const double lJd = l[0] * dv[1] - l[1] * dv[0];
            s += 2 * std::cos(2 * kPi * lJd) * std::exp(-kPi * ps.norm2[k]);
        }
        out[0] = s;
    });
    return make_verdict("coherent.t2", cols[0], 1.0 + std::norm(coherent_overlap(alphas[0], alphas[1])));
}

struct T3Row {
    cd a1, a2, a3;
    double g = 0, se = 0;
    double sym = 0;       // 1 + sum of pair overlaps + 2 Re(triple product)
    double residual = 0;  // g - a3_fit / 6 * sym
};

struct T3Probe {
    std::vector<T3Row> rows;
    double a3_fit = 0;
    double a3_haar_ratio_hint = 0;  // 2 a3 / a2^2 with a2 = 2
    double rms_residual = 0;
};

/// Exploratory third moment. Per lattice:
/// sum_{l1, l2} s(l1, l2) e^{2 pi i ((x1 - x3)^T J l1 + (x2 - x3)^T J l2)}
///   e^{-pi (|l1|^2 + |l2|^2 + |l1 + l2|^2) / 2},
/// with s = e^{i (Phi(l1) + Phi(l2) + Phi(l1 + l2))} = (-1)^{a1^T A a2}.
inline T3Probe coherent_t3_probe(const std::vector<std::array<cd, 3>>& triples, std::uint64_t samples,
                                 std::uint64_t seed, unsigned shards = 1) {
    T3Probe probe;
    const std::vector<GaussMajorant> maj{{1.0, kPi / 2}};
    for (std::size_t q = 0; q < triples.size(); ++q) {
        const auto& tr = triples[q];
        const VectorXd x13 = coherent_shift(tr[0] - tr[2]);
        const VectorXd x23 = coherent_shift(tr[1] - tr[2]);
        auto cols = mc_collect(samples, 1, seed, shards, 400 + q, [&](Rng& rng, double* out) {
            const LatticeSample L = sample_y1(rng);
            const PointSet ps =
                enumerate_points(L.basis, lattice_radius(maj, L.basis.shortest_lower_bound(), 2, 1e-12), false, false);
            const std::size_t m = ps.size();
            const MatrixXl& A = L.basis.gram();
            double s = 0;
            for (std::size_t i = 0; i <= m; ++i) {
                const double l1[2] = {i < m ? ps.v(i)[0] : 0.0, i < m ? ps.v(i)[1] : 0.0};
                const long long c1[2] = {i < m ? ps.c(i)[0] : 0, i < m ? ps.c(i)[1] : 0};
                const double n1 = l1[0] * l1[0] + l1[1] * l1[1];
                const double th1 = x13[0] * l1[1] - x13[1] * l1[0];
                for (std::size_t j = 0; j <= m; ++j) {
                    const double l2[2] = {j < m ? ps.v(j)[0] : 0.0, j < m ? ps.v(j)[1] : 0.0};
                    const long long c2[2] = {j < m ? ps.c(j)[0] : 0, j < m ? ps.c(j)[1] : 0};
                    const double n2 = l2[0] * l2[0] + l2[1] * l2[1];
                    const double n12 = (l1[0] + l2[0]) * (l1[0] + l2[0]) + (l1[1] + l2[1]) * (l1[1] + l2[1]);
                    const double e = kPi * (n1 + n2 + n12) / 2;
                    if (e > 40) continue;
                    const long long c12[2] = {c1[0] + c2[0], c1[1] + c2[1]};
                    const int sign = phase_sign(A, c1, 2) * phase_sign(A, c2, 2) * phase_sign(A, c12, 2);
                    const double th = 2 * kPi * (th1 + x23[0] * l2[1] - x23[1] * l2[0]);
                    s += sign * std::cos(th) * std::exp(-e);
                }
            }
            out[0] = s;
        });
        const McVerdict v = make_verdict("coherent.t3", cols[0], 0.0);
        T3Row r;
        r.a1 = tr[0];
        r.a2 = tr[1];
        r.a3 = tr[2];
        r.g = v.estimate;
        r.se = v.std_error;
        const cd o12 = coherent_overlap(tr[0], tr[1]), o23 = coherent_overlap(tr[1], tr[2]),
                 o31 = coherent_overlap(tr[2], tr[0]);
        r.sym = 1 + std::norm(o12) + std::norm(o23) + std::norm(o31) + 2 * (o12 * o23 * o31).real();
        probe.rows.push_back(r);
    }
    double num = 0, den = 0;
    for (const auto& r : probe.rows) {
        num += r.g * r.sym;
        den += r.sym * r.sym;
    }
    probe.a3_fit = den > 0 ? 6 * num / den : 0.0;
    double rr = 0;
    for (auto& r : probe.rows) {
        r.residual = r.g - probe.a3_fit / 6 * r.sym;
        rr += r.residual * r.residual;
    }
    probe.rms_residual = probe.rows.empty() ? 0.0 : std::sqrt(rr / probe.rows.size());
    probe.a3_haar_ratio_hint = 2 * probe.a3_fit / (kA2 * kA2);
    return probe;
}

// ---------------------------------------------------------------- counting

/// Volume of the 2n-ball: pi^n R^{2n} / n!.
inline double ball_volume_2n(int n, double R) { return std::pow(kPi, n) * std::pow(R, 2 * n) / std::tgamma(n + 1.0); }

struct CountingResult {
    int n = 0;
    double R = 0;
    McVerdict mean_all;
    McVerdict mean_primitive_zeta_2n;  // target V / zeta(2n)
    McVerdict primitive_fraction;       // target 1 / zeta(2n)
    double var_all = 0, var_primitive = 0;
    double var_bound = 0;               // 4 zeta(n) V for n >= 2; NaN at n = 1
    double paper_primitive_mean = 0;    // V / zeta(n); +inf at n = 1
};

inline CountingResult counting_stats(double R, int n, std::uint64_t samples, std::uint64_t seed, unsigned shards = 1,
                                     int approx_steps = 20) {
    CountingResult res;
    res.n = n;
    res.R = R;
    const double V = ball_volume_2n(n, R);
    const double z2n = std::riemann_zeta(2.0 * n);
    auto cols = mc_collect(samples, 2, seed, shards, 501, [&](Rng& rng, double* out) {
        const LatticeSample L = verifier_lattice(n, approx_steps, rng);
        const PointSet ps = enumerate_points(L.basis, R, false, false);
        double prim = 0;
        for (std::size_t k = 0; k < ps.size(); ++k)
            if (coeff_gcd(ps.c(k), ps.dim) == 1) prim += 1;
        out[0] = static_cast<double>(ps.size());
        out[1] = prim;
    });
    res.mean_all = make_verdict("counting.mean", cols[0], V);
    res.mean_primitive_zeta_2n = make_verdict("counting.primitive_mean", cols[1], V / z2n);
    // ratio estimator with a linearized per-sample residual
    const double ma = std::accumulate(cols[0].begin(), cols[0].end(), 0.0) / cols[0].size();
    const double mp = std::accumulate(cols[1].begin(), cols[1].end(), 0.0) / cols[1].size();
    const double frac = mp / ma;
    std::vector<double> lin(cols[0].size());
    for (std::size_t k = 0; k < lin.size(); ++k) lin[k] = frac + (cols[1][k] - frac * cols[0][k]) / ma;
    res.primitive_fraction = make_verdict("counting.primitive_fraction", lin, 1 / z2n);
    auto var = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return v.size() > 1 ? s / (v.size() - 1) : 0.0;
    };
    res.var_all = var(cols[0]);
    res.var_primitive = var(cols[1]);
    res.var_bound = n >= 2 ? 4 * std::riemann_zeta(static_cast<double>(n)) * V : std::nan("");
    res.paper_primitive_mean = n >= 2 ? V / std::riemann_zeta(static_cast<double>(n))
                                      : std::numeric_limits<double>::infinity();
    if (n > 1) {
        res.mean_all.caveat = res.mean_primitive_zeta_2n.caveat = res.primitive_fraction.caveat = kApproxCaveat;
    }
    return res;
}

// ---------------------------------------------------------------- physicality

struct PhysicalityRow {
    std::string label;
    double nbar = 0;
    double max_density = 0;  // max over sampled pointers of <X|rho|X>
    double bound = 0;        // (nbar / pi)^{2n}
    double margin = 0;       // bound * 1.1 / max_density
};

/// Largest sampled pointer density of each state against (nbar/pi)^{2n}.
inline std::vector<PhysicalityRow> physicality_margins(const std::vector<std::pair<std::string, ObservableSpec>>& states,
                                                       std::uint64_t pointers, std::uint64_t seed) {
    std::vector<PhysicalityRow> rows;
    for (std::size_t q = 0; q < states.size(); ++q) {
        const auto& [label, rho] = states[q];
        PhysicalityRow r;
        r.label = label;
        r.nbar = mean_photon_number(rho);
        r.bound = std::pow(r.nbar / kPi, 2 * rho.n);
        const RadiusTable tab(majorant(rho), rho.dim(), 1e-10);
        Rng rng = make_stream(seed, 0, 600 + q);
        for (std::uint64_t k = 0; k < pointers; ++k) {
            const LatticeSample L = rho.n == 1 ? sample_y1(rng) : sample_local(rho.n, rng);
            const PointSet ps = enumerate_points(L.basis, tab.radius(L.basis.shortest_lower_bound()), true, true);
            PointerSum s;
            s.build(ps, rho, 0.0);
            const PointerSample p = sample_pointer_rejection(L.basis, s, rng);
            r.max_density = std::max(r.max_density, p.prob_mass);
        }
        r.margin = r.max_density > 0 ? 1.1 * r.bound / r.max_density : std::numeric_limits<double>::infinity();
        rows.push_back(r);
    }
    return rows;
}

}  // namespace gkps
