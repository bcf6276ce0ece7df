#pragma once
// Shadow tomography with random GKP pointers: pointer sampling, single-shot
// estimators, medians of means, variance bounds, sample plans and the two
// measurement-circuit simulators.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gkpshadow/charfun.hpp"
#include "gkpshadow/lattice_random.hpp"
#include "gkpshadow/lattice_sum.hpp"

namespace gkps {

/// Second design coefficient of the displaced GKP ensemble.
inline constexpr double kA2 = 2.0;

/// Default shard count: GKPS_SHARDS overrides the hardware concurrency.
inline unsigned default_shards() {
    if (const char* e = std::getenv("GKPS_SHARDS")) {
        const long v = std::strtol(e, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(shard, begin, end) for each shard on its own thread.
inline void run_sharded(std::uint64_t total, unsigned shards,
                        const std::function<void(unsigned, std::uint64_t, std::uint64_t)>& fn) {
    shards = std::max(1u, shards);
    if (shards == 1) {
        fn(0, 0, total);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(shards);
    for (unsigned s = 0; s < shards; ++s) {
        const auto [b, e] = shard_range(total, shards, s);
        pool.emplace_back([&, s, b = b, e = e] {
            try {
                fn(s, b, e);
            } catch (...) {
                errs[s] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------- pointers

/// Enumerated points and prepared overlap sums for one lattice and a list of specs.
struct LatticeContext {
    const SymplecticBasis* basis = nullptr;
    PointSet points;
    std::vector<PointerSum> sums;
};

inline LatticeContext prepare_context(const SymplecticBasis& basis, const std::vector<const ObservableSpec*>& specs,
                                      const std::vector<const RadiusTable*>& tables) {
    LatticeContext ctx;
    ctx.basis = &basis;
    const double s = basis.shortest_lower_bound();
    double R = 0;
    for (const auto* t : tables) R = std::max(R, t->radius(s));
    ctx.points = enumerate_points(basis, R, true, true);
    ctx.sums.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) ctx.sums[i].build(ctx.points, *specs[i], tables[i]->tail(R, s));
    return ctx;
}

struct PointerSample {
    LatticeKind kind = LatticeKind::ExactY1;
    VectorXd alpha;           // in the centered cell of the sampled basis
    double prob_mass = 0;     // density value at alpha (grid: at the chosen cell)
    int grid_res = 0;         // 0 for the rejection sampler
    double grid_mass = 1.0;   // total grid mass before normalization
    std::uint64_t proposals = 0;
};

/// Exact sampling of alpha with density P(alpha) = rho_sum.eval(alpha) on the
/// reduced cell by rejection from the uniform law with envelope abs_sum + tail.
inline PointerSample sample_pointer_rejection(const SymplecticBasis& basis, const PointerSum& rho_sum, Rng& rng,
                                              std::uint64_t budget = 10000000) {
    const int d = basis.dim();
    const MatrixXd& B = basis.reduced();
    const double bound = rho_sum.abs_sum + rho_sum.tail;
    VectorXd u(d), alpha(d);
    PointerSample out;
    for (std::uint64_t k = 1; k <= budget; ++k) {
        for (int i = 0; i < d; ++i) u[i] = uniform01(rng) - 0.5;
        alpha.noalias() = B.transpose() * u;
        const double p = rho_sum.eval(alpha.data());
        if (uniform01(rng) * bound < p) {
            out.alpha = reduce_mod_cell(basis, alpha);
            out.prob_mass = p;
            out.proposals = k;
            return out;
        }
    }
    throw Error(Errc::RejectionBudgetExceeded, "pointer rejection sampler");
}

inline constexpr double kGridMassTol = 1e-3;

/// Grid sampler: P on res^{2n} cell centres (reduced-basis coordinates),
/// clipped, normalized, inverse-CDF cell choice and uniform jitter.
inline PointerSample sample_pointer_grid(const SymplecticBasis& basis, const PointerSum& rho_sum, int res, Rng& rng,
                                         double eps_grid = kGridMassTol) {
    const int d = basis.dim();
    if (d > 4) throw Error(Errc::InvalidArgument, "grid sampler limited to n <= 2");
    const MatrixXd& B = basis.reduced();
    std::size_t cells = 1;
    for (int i = 0; i < d; ++i) cells *= static_cast<std::size_t>(res);
    std::vector<double> cdf(cells);
    VectorXd u(d), alpha(d);
    double total = 0;
    const double neg_tol = std::max(1e-9, rho_sum.tail);
    for (std::size_t c = 0; c < cells; ++c) {
        std::size_t r = c;
        for (int i = 0; i < d; ++i) {
            u[i] = (static_cast<double>(r % res) + 0.5) / res - 0.5;
            r /= res;
        }
        alpha.noalias() = B.transpose() * u;
        double p = rho_sum.eval(alpha.data());
        if (p < -neg_tol) throw Error(Errc::NegativeDensity, std::to_string(p));
        p = std::max(p, 0.0);
        total += p;
        cdf[c] = total;
    }
    const double mass = total / static_cast<double>(cells);
    if (std::abs(mass - 1.0) > eps_grid) throw Error(Errc::MassDeficit, std::to_string(mass));
    const double target = uniform01(rng) * total;
    const std::size_t c = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin(),
                                                 cells - 1);
    std::size_t r = c;
    for (int i = 0; i < d; ++i) {
        u[i] = (static_cast<double>(r % res) + uniform01(rng)) / res - 0.5;
        r /= res;
    }
    alpha.noalias() = B.transpose() * u;
    PointerSample out;
    out.alpha = reduce_mod_cell(basis, alpha);
    out.prob_mass = (cdf[c] - (c ? cdf[c - 1] : 0.0)) / mass;
    out.grid_res = res;
    out.grid_mass = mass;
    out.proposals = 1;
    return out;
}

/// Single-shot estimate (2/a2) <X|O|X> - Tr O.
inline double estimator(const PointerSum& o_sum, const VectorXd& alpha) {
    return (2.0 / kA2) * o_sum.eval(alpha.data()) - o_sum.w0.real();
}

// ---------------------------------------------------------------- statistics

struct MomResult {
    double value = 0;
    std::vector<double> batch_means;
    std::size_t batch_size = 0;
    std::size_t dropped = 0;
};

/// Median (lower-middle for even K) of K consecutive batch means.
inline MomResult mom(const std::vector<double>& values, std::size_t K) {
    if (values.empty() || K == 0 || values.size() < K) throw Error(Errc::EmptyInput, "medians of means input");
    MomResult r;
    r.batch_size = values.size() / K;
    r.dropped = values.size() - r.batch_size * K;
    for (std::size_t k = 0; k < K; ++k) {
        double s = 0;
        for (std::size_t i = k * r.batch_size; i < (k + 1) * r.batch_size; ++i) s += values[i];
        r.batch_means.push_back(s / static_cast<double>(r.batch_size));
    }
    std::vector<double> sorted = r.batch_means;
    std::sort(sorted.begin(), sorted.end());
    r.value = sorted[(K - 1) / 2];
    return r;
}

struct SamplePlan {
    std::uint64_t B = 0, K = 0, N = 0;
};

/// B = ceil(34 V / eps^2), K = ceil(2 ln(2M / delta)), N = B K.
inline SamplePlan sample_plan(double V, double eps, double delta, std::uint64_t M) {
    if (!(V > 0 && eps > 0 && delta > 0 && M > 0)) throw Error(Errc::InvalidArgument, "sample plan inputs");
    SamplePlan p;
    p.B = static_cast<std::uint64_t>(std::ceil(34.0 * V / (eps * eps) - 1e-9));
    p.K = static_cast<std::uint64_t>(std::ceil(2.0 * std::log(2.0 * M / delta) - 1e-9));
    p.N = p.B * p.K;
    return p;
}

/// f_1 = 1, f_n = 4 zeta(n)^2 / zeta(2n).
inline double f_n(int n) {
    if (n < 1) throw Error(Errc::InvalidArgument, "n >= 1");
    if (n == 1) return 1.0;
    const double z = std::riemann_zeta(static_cast<double>(n));
    return 4.0 * z * z / std::riemann_zeta(2.0 * n);
}

struct DesignCoeffs {
    double a2 = 0, a3 = 0, ratio = 0;
};

/// Haar design coefficients on C^d and the ratio 2 a3 / a2^2.
inline DesignCoeffs design_coeff_ratio(int d) {
    if (d < 2) throw Error(Errc::InvalidArgument, "d >= 2");
    DesignCoeffs c;
    c.a2 = 2.0 / (d + 1);
    c.a3 = 6.0 / ((d + 1.0) * (d + 2.0));
    c.ratio = 2 * c.a3 / (c.a2 * c.a2);
    return c;
}

struct VarianceBounds {
    double l1 = 0, l2sq = 0, trace = 0;
    double vhat = 0;
    std::optional<double> vtilde;
    std::optional<double> vloc;
    double purity_sum = 0;  // sum over subsets of Tr_S[(Tr_{S^c} O)^2]
};

/// sum over kept-mode subsets S of Tr[(Tr_{S^c} O)^2]; the empty subset gives (Tr O)^2.
inline double subset_purity_sum(const ObservableSpec& O) {
    const int n = O.n;
    double s = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> keep;
        for (int m = 0; m < n; ++m)
            if (mask & (1u << m)) keep.push_back(m);
        if (keep.empty()) {
            s += std::norm(O.trace());
        } else {
            s += l2sq(marginal(O, keep));
        }
    }
    return s;
}

/// Closed form of the subset purity sum for O = e^{-beta N} on n modes:
/// sum_k C(n,k) (1-e^{-2 beta})^{-(n-k)} (1-e^{-beta})^{-2k} = (1-e^{-beta})^{-2n} (2/(1+e^{-beta}))^n.
inline double thermal_subset_purity_sum(double beta, int n) {
    const double e = std::exp(-beta);
    return std::pow(1 - e, -2.0 * n) * std::pow(2.0 / (1 + e), n);
}

/// Mean photon number of a single-term Gaussian state spec.
inline double mean_photon_number(const ObservableSpec& rho) {
    if (rho.terms.size() != 1) throw Error(Errc::InvalidArgument, "mean photon number needs a single Gaussian term");
    const auto& t = rho.terms[0];
    const int n = rho.n;
    const MatrixXd J = symplectic_form(n);
    const MatrixXd V = J * t.G.real() * J.transpose() / kPi;
    const VectorXd xbar = (J * t.b.imag()) * (-1.0 / std::sqrt(2 * kPi));
    double N = 0;
    for (int i = 0; i < n; ++i) N += 0.5 * (V(i, i) + V(n + i, n + i) - 1.0) + 0.5 * (xbar[i] * xbar[i] + xbar[n + i] * xbar[n + i]);
    return N;
}

/// V_hat = (||c_O||_1 + |Tr O|)^2 + f_n Tr O^2; V_tilde = (nbar/pi)^{2n} (Tr O^2 + (Tr O)^2);
/// V_loc = (nbar/pi)^{2n} sum_S Tr[(Tr_{S^c} O)^2].
inline VarianceBounds variance_bounds(const ObservableSpec& O, std::optional<double> nbar = std::nullopt) {
    VarianceBounds v;
    const Norms nm = norms(O);
    v.l1 = nm.l1;
    v.l2sq = nm.l2sq;
    v.trace = nm.trace.real();
    const int n = O.n;
    v.vhat = std::pow(v.l1 + std::abs(v.trace), 2) + f_n(n) * v.l2sq;
    v.purity_sum = subset_purity_sum(O);
    if (nbar) {
        const double f = std::pow(*nbar / kPi, 2 * n);
        v.vtilde = f * (v.l2sq + v.trace * v.trace);
        v.vloc = f * v.purity_sum;
    }
    return v;
}

// ---------------------------------------------------------------- circuits

struct QubitCircuitResult {
    double estimate = 0;
    double se = 0;
    std::uint64_t shots = 0;
    double exact = 0;
    double hoeffding_shots_for = 0;  // 2 ln(2/delta) / eps^2 at eps = 0.01, delta = 0.05
};

/// Ancilla-controlled displacement: P(+) = 1/2 + Re Tr[D(lambda) rho] / 2.
inline QubitCircuitResult qubit_circuit_shots(const ObservableSpec& rho, const VectorXd& lambda, std::uint64_t shots,
                                              Rng& rng) {
    QubitCircuitResult r;
    r.exact = rho.eval(VectorXd(-lambda)).real();
    if (std::abs(r.exact) > 1 + 1e-12) throw Error(Errc::InvalidArgument, "|Re c| > 1");
    const double p = std::clamp(0.5 + 0.5 * r.exact, 0.0, 1.0);
    const std::uint64_t k = std::binomial_distribution<std::uint64_t>(shots, p)(rng);
    const double f = static_cast<double>(k) / static_cast<double>(shots);
    r.estimate = 2 * f - 1;
    r.se = 2 * std::sqrt(std::max(f * (1 - f), 0.0) / static_cast<double>(shots));
    r.shots = shots;
    r.hoeffding_shots_for = 2 * std::log(2 / 0.05) / (0.01 * 0.01);
    return r;
}

struct GkpCircuitResult {
    std::vector<int> ell;
    std::vector<cd> estimate;  // deconvolved Fourier coefficients
    std::vector<double> se_re, se_im;
    std::vector<cd> exact;     // Tr[D(ell lambda) rho]
    std::vector<double> attenuation;
    std::vector<double> samples;  // momentum readouts in [0, sqrt(2 pi))
    int terms = 0;
};

/// Periodic momentum statistics of the GKP-assisted circuit:
/// P(p) = (2 pi)^{-1/2} sum_l a_l Tr[D(l lambda) rho] e^{i sqrt(2 pi) l p} on one period,
/// with attenuation a_l = exp(-pi l^2 Delta_aux^2 / 2) for a finite-energy auxiliary state.
inline GkpCircuitResult gkp_circuit_sample(const ObservableSpec& rho, const VectorXd& lambda, std::uint64_t shots,
                                           int fourier_max, std::optional<double> beta_aux, Rng& rng,
                                           bool keep_samples = false) {
    const double T = std::sqrt(2 * kPi);
    const double d2aux = beta_aux ? delta_sq(*beta_aux) : 0.0;
    auto coeff = [&](int l) { return rho.eval(VectorXd(-static_cast<double>(l) * lambda)); };
    auto atten = [&](int l) { return std::exp(-kPi * l * l * d2aux / 2); };
    int L = 0;
    while (L < 200 && std::abs(coeff(L + 1)) * atten(L + 1) > 1e-15) ++L;
    std::vector<cd> w(2 * L + 1);
    for (int l = -L; l <= L; ++l) w[l + L] = atten(l) * coeff(l);
    auto density = [&](double p) {
        double s = 0;
        for (int l = -L; l <= L; ++l) s += (w[l + L] * std::polar(1.0, T * l * p)).real();
        return s / T;
    };
    auto cdf = [&](double p) {
        double s = w[L].real() * p;
        for (int l = 1; l <= L; ++l) {
            // pair l and -l: integral of 2 Re(w_l e^{i T l x}) from 0 to p
            const cd z = w[l + L] * (std::polar(1.0, T * l * p) - 1.0) / cd(0, T * l);
            s += 2 * z.real();
        }
        return s / T;
    };
    if (std::abs(cdf(T) - 1.0) > 1e-9) throw Error(Errc::PeriodMismatch, std::to_string(cdf(T)));
    double dmax = 0, dmin = 0;
    for (int g = 0; g < 4096; ++g) {
        const double v = density(T * g / 4096.0);
        dmax = std::max(dmax, v);
        dmin = std::min(dmin, v);
    }
    if (dmin < -1e-9 * std::max(1.0, dmax)) throw Error(Errc::DensityNegative, std::to_string(dmin));

    GkpCircuitResult r;
    r.terms = 2 * L + 1;
    std::vector<cd> acc(fourier_max + 1, 0.0);
    std::vector<double> acc_c2(fourier_max + 1, 0.0), acc_s2(fourier_max + 1, 0.0);
    for (std::uint64_t k = 0; k < shots; ++k) {
        const double u = uniform01(rng);
        double lo = 0, hi = T;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cdf(mid) < u ? lo : hi) = mid;
        }
        const double p = 0.5 * (lo + hi);
        if (keep_samples) r.samples.push_back(p);
        for (int l = 0; l <= fourier_max; ++l) {
            const double c = std::cos(T * l * p), s = -std::sin(T * l * p);
            acc[l] += cd(c, s);
            acc_c2[l] += c * c;
            acc_s2[l] += s * s;
        }
    }
    const double S = static_cast<double>(shots);
    for (int l = -fourier_max; l <= fourier_max; ++l) {
        const int a = std::abs(l);
        cd m = acc[a] / S;
        double vc = acc_c2[a] / S - m.real() * m.real();
        double vs = acc_s2[a] / S - m.imag() * m.imag();
        if (l < 0) m = std::conj(m);
        const double at = atten(l);
        r.ell.push_back(l);
        r.attenuation.push_back(at);
        r.estimate.push_back(m / at);
        r.se_re.push_back(std::sqrt(std::max(vc, 0.0) / S) / at);
        r.se_im.push_back(std::sqrt(std::max(vs, 0.0) / S) / at);
        r.exact.push_back(coeff(l));
    }
    return r;
}

// ---------------------------------------------------------------- protocol

enum class ShadowMode { Global, Local };
enum class PointerSampler { Rejection, Grid };

struct ShadowConfig {
    ShadowMode mode = ShadowMode::Global;
    int n = 1;
    ObservableSpec state;
    std::vector<ObservableSpec> observables;
    double epsilon = 0.1;
    double delta = 0.05;
    std::optional<std::uint64_t> N, B, K;
    std::uint64_t seed = 1;
    unsigned shards = 1;
    double tol = 1e-10;
    int grid_res = 0;  // 0: default 64 (n = 1) or 16 (n = 2)
    PointerSampler sampler = PointerSampler::Rejection;
    int approx_steps = 20;       // Hecke steps for the approximate Y_n sampler
    std::optional<double> nbar;  // defaults to the state's mean photon number
    std::string plan_bound = "vhat";
    double c_multiplier = 1.0;
};

struct ObservableReport {
    std::string label;
    double mom = 0;
    std::vector<double> batch_means;
    double mean = 0;
    double emp_var = 0;
    double se = 0;
    VarianceBounds bounds;
    SamplePlan plan;
    std::optional<double> truth;
};

struct EstimateReport {
    std::vector<ObservableReport> observables;
    std::uint64_t seed = 0;
    unsigned shards = 1;
    std::string lattice_kind;
    double mean_proposals = 0;
    std::size_t dropped = 0;
};

/// Resolves (B, K, N) from the configuration and the variance bound.
inline SamplePlan resolve_plan(const ShadowConfig& cfg, double V) {
    const std::uint64_t M = cfg.observables.size();
    const SamplePlan base = sample_plan(V, cfg.epsilon, cfg.delta, M);
    SamplePlan p;
    if (cfg.B && cfg.K) {
        p.B = *cfg.B;
        p.K = *cfg.K;
        p.N = p.B * p.K;
        if (cfg.N && *cfg.N != p.N) throw Error(Errc::SchemaError, "N differs from B*K");
    } else if (cfg.N) {
        p.K = cfg.K ? *cfg.K : base.K;
        p.N = *cfg.N;
        p.B = p.N / p.K;
    } else {
        p = base;
        p.B = static_cast<std::uint64_t>(std::ceil(p.B * cfg.c_multiplier));
        if (cfg.K) p.K = *cfg.K;
        p.N = p.B * p.K;
    }
    if (p.N == 0 || p.K == 0 || p.B == 0) throw Error(Errc::EmptyInput, "zero samples");
    return p;
}

/// Per-shot estimates for each observable, merged in shard order.
struct ShotStream {
    std::vector<std::vector<double>> values;  // [observable][shot]
    double mean_proposals = 0;
};

inline ShotStream shadow_shots(const ShadowConfig& cfg, std::uint64_t N) {
    const int n = cfg.n;
    const std::size_t M = cfg.observables.size();
    if (cfg.state.n != n) throw Error(Errc::DimensionMismatch, "state mode count");
    for (const auto& o : cfg.observables)
        if (o.n != n) throw Error(Errc::DimensionMismatch, "observable mode count");
    const int res = cfg.grid_res > 0 ? cfg.grid_res : (n == 1 ? 64 : 16);
    const unsigned shards = std::max(1u, cfg.shards);
    std::vector<std::vector<std::vector<double>>> per_shard(shards, std::vector<std::vector<double>>(M));
    std::vector<double> proposals(shards, 0.0);

    if (cfg.mode == ShadowMode::Global) {
        if (cfg.sampler == PointerSampler::Grid && n > 2) throw Error(Errc::InvalidArgument, "grid sampler needs n <= 2");
        std::vector<const ObservableSpec*> specs{&cfg.state};
        for (const auto& o : cfg.observables) specs.push_back(&o);
        std::vector<RadiusTable> tabs;
        for (const auto* s : specs) tabs.emplace_back(majorant(*s), 2 * n, cfg.tol);
        std::vector<const RadiusTable*> tp;
        for (const auto& t : tabs) tp.push_back(&t);
        run_sharded(N, shards, [&](unsigned s, std::uint64_t b, std::uint64_t e) {
            Rng rng = make_stream(cfg.seed, s);
            for (std::uint64_t k = b; k < e; ++k) {
                const LatticeSample L = n == 1 ? sample_y1(rng) : sample_yn_approx(n, cfg.approx_steps, rng);
                const LatticeContext ctx = prepare_context(L.basis, specs, tp);
                const PointerSample ptr = cfg.sampler == PointerSampler::Grid
                                              ? sample_pointer_grid(L.basis, ctx.sums[0], res, rng)
                                              : sample_pointer_rejection(L.basis, ctx.sums[0], rng);
                proposals[s] += static_cast<double>(ptr.proposals);
                for (std::size_t i = 0; i < M; ++i) per_shard[s][i].push_back(estimator(ctx.sums[i + 1], ptr.alpha));
            }
        });
    } else {
        // Local mode: product of Y_1 pointers; observables must factorize per mode.
        const auto rho_f = factorize(cfg.state);
        const bool rho_product = rho_f && rho_f->size() == 1;
        std::vector<std::vector<std::vector<GaussianChar>>> obs_f;
        for (const auto& o : cfg.observables) {
            auto f = factorize(o);
            if (!f) throw Error(Errc::NotFactorizable, "local mode needs per-mode factorized observables");
            obs_f.push_back(*f);
        }
        auto single = [](const GaussianChar& g) {
            ObservableSpec s;
            s.n = 1;
            s.terms = {g};
            return s;
        };
        // per mode: spec list = [rho_m (if product)] + every observable term factor
        std::vector<std::vector<ObservableSpec>> mode_specs(n);
        for (int m = 0; m < n; ++m) {
            if (rho_product) mode_specs[m].push_back(single((*rho_f)[0][m]));
            for (const auto& of : obs_f)
                for (const auto& term : of) mode_specs[m].push_back(single(term[m]));
        }
        std::vector<std::vector<RadiusTable>> mode_tabs(n);
        for (int m = 0; m < n; ++m)
            for (const auto& sp : mode_specs[m]) mode_tabs[m].emplace_back(majorant(sp), 2, cfg.tol);
        RadiusTable joint_tab;
        if (!rho_product) joint_tab = RadiusTable(majorant(cfg.state), 2 * n, cfg.tol);
        const std::size_t off = rho_product ? 1 : 0;

        run_sharded(N, shards, [&](unsigned s, std::uint64_t b, std::uint64_t e) {
            Rng rng = make_stream(cfg.seed, s);
            for (std::uint64_t k = b; k < e; ++k) {
                std::vector<MatrixXd> rows;
                const LatticeSample L = sample_local(n, rng, &rows);
                std::vector<SymplecticBasis> mb;
                for (const auto& r : rows) mb.emplace_back(r);
                std::vector<LatticeContext> ctx;
                for (int m = 0; m < n; ++m) {
                    std::vector<const ObservableSpec*> sp;
                    std::vector<const RadiusTable*> tp;
                    for (std::size_t i = 0; i < mode_specs[m].size(); ++i) {
                        sp.push_back(&mode_specs[m][i]);
                        tp.push_back(&mode_tabs[m][i]);
                    }
                    ctx.push_back(prepare_context(mb[m], sp, tp));
                }
                std::vector<VectorXd> alpha(n);
                if (rho_product) {
                    for (int m = 0; m < n; ++m) {
                        const PointerSample p = sample_pointer_rejection(mb[m], ctx[m].sums[0], rng);
                        alpha[m] = p.alpha;
                        proposals[s] += static_cast<double>(p.proposals) / n;
                    }
                } else {
                    const LatticeContext jc = prepare_context(L.basis, {&cfg.state}, {&joint_tab});
                    const PointerSample p = sample_pointer_rejection(L.basis, jc.sums[0], rng);
                    proposals[s] += static_cast<double>(p.proposals);
                    for (int m = 0; m < n; ++m) {
                        VectorXd a(2);
                        a << p.alpha[m], p.alpha[n + m];
                        alpha[m] = reduce_mod_cell(mb[m], a);
                    }
                }
                std::size_t idx = off;
                for (std::size_t i = 0; i < M; ++i) {
                    double v = 0;
                    for (std::size_t t = 0; t < obs_f[i].size(); ++t) {
                        double prod = 1;
                        for (int m = 0; m < n; ++m) prod *= estimator(ctx[m].sums[idx + t], alpha[m]);
                        v += prod;
                    }
                    idx += obs_f[i].size();
                    per_shard[s][i].push_back(v);
                }
            }
        });
    }
    ShotStream out;
    out.values.assign(M, {});
    for (unsigned s = 0; s < shards; ++s)
        for (std::size_t i = 0; i < M; ++i)
            out.values[i].insert(out.values[i].end(), per_shard[s][i].begin(), per_shard[s][i].end());
    out.mean_proposals = std::accumulate(proposals.begin(), proposals.end(), 0.0) / static_cast<double>(N);
    return out;
}

inline EstimateReport run_shadow(const ShadowConfig& cfg) {
    if (cfg.observables.empty()) throw Error(Errc::EmptyInput, "no observables");
    if (!(cfg.epsilon > 0 && cfg.epsilon < 1 && cfg.delta > 0 && cfg.delta < 1))
        throw Error(Errc::SchemaError, "epsilon and delta must lie in (0, 1)");
    if (cfg.N && *cfg.N == 0) throw Error(Errc::EmptyInput, "N = 0");
    std::optional<double> nbar = cfg.nbar;
    if (!nbar && cfg.state.terms.size() == 1) nbar = mean_photon_number(cfg.state);
    std::vector<VarianceBounds> vb;
    double Vplan = 0;
    for (const auto& o : cfg.observables) {
        vb.push_back(variance_bounds(o, nbar));
        double v = vb.back().vhat;
        if (cfg.plan_bound == "vtilde" && vb.back().vtilde) v = *vb.back().vtilde;
        if (cfg.plan_bound == "vloc" && vb.back().vloc) v = *vb.back().vloc;
        Vplan = std::max(Vplan, v);
    }
    const SamplePlan plan = resolve_plan(cfg, Vplan);
    const ShotStream shots = shadow_shots(cfg, plan.N);
    EstimateReport rep;
    rep.seed = cfg.seed;
    rep.shards = std::max(1u, cfg.shards);
    rep.lattice_kind = cfg.mode == ShadowMode::Local ? (cfg.n == 1 ? "exact-Y1" : "local-product")
                                                     : (cfg.n == 1 ? "exact-Y1" : "approx-Yn");
    rep.mean_proposals = shots.mean_proposals;
    for (std::size_t i = 0; i < cfg.observables.size(); ++i) {
        const auto& v = shots.values[i];
        ObservableReport r;
        r.label = cfg.observables[i].label;
        const MomResult m = mom(v, plan.K);
        r.mom = m.value;
        r.batch_means = m.batch_means;
        rep.dropped = m.dropped;
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        r.mean = mean;
        r.emp_var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
        r.se = std::sqrt(r.emp_var / static_cast<double>(v.size()));
        r.bounds = vb[i];
        r.plan = plan;
        r.truth = trace_product(cfg.observables[i], cfg.state).real();
        rep.observables.push_back(r);
    }
    return rep;
}

// ---------------------------------------------------------------- bound table

struct BoundRow {
    int n = 0;
    double qubit_global = 0;  // Tr[O'^2] = (2 cosh 2 beta)^n
    double gkp_global = 0;    // (nbar / (pi beta))^{2n}
    double qubit_local = 0;   // 4^n
    double gkp_local = 0;     // (nbar / (pi beta))^{2n}
    double vtilde_exact = 0;  // (nbar/pi)^{2n} (Tr O^2 + (Tr O)^2) for O = e^{-beta N}
    double vloc_exact = 0;    // (nbar/pi)^{2n} sum_S Tr[(Tr_{S^c} O)^2]
};

inline std::vector<BoundRow> thermal_bound_table(double beta, double nbar, int n_lo, int n_hi) {
    if (!(beta > 0)) throw Error(Errc::NonPositiveBeta, "beta must be positive");
    std::vector<BoundRow> rows;
    for (int n = n_lo; n <= n_hi; ++n) {
        BoundRow r;
        r.n = n;
        r.qubit_global = std::pow(2 * std::cosh(2 * beta), n);
        r.gkp_global = std::pow(nbar / (kPi * beta), 2 * n);
        r.qubit_local = std::pow(4.0, n);
        r.gkp_local = r.gkp_global;
        const double f = std::pow(nbar / kPi, 2 * n);
        const double tr = std::pow(1 - std::exp(-beta), -n);
        const double tr2 = std::pow(1 - std::exp(-2 * beta), -n);
        r.vtilde_exact = f * (tr2 + tr * tr);
        r.vloc_exact = f * thermal_subset_purity_sum(beta, n);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace gkps
