// Closed-form characteristic functions, norms and effective squeezing.

#include <gtest/gtest.h>

#include "gkpshadow/fock.hpp"
#include "gkpshadow/rng.hpp"

using namespace gkps;

namespace {

constexpr int kCutoff = 60;

VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

// Riemann sum of f over [-L, L]^2.
template <class F>
double grid_integral(F f, double L = 8.0, int m = 800) {
    const double h = 2 * L / m;
    double s = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) s += f(v2(-L + (i + 0.5) * h, -L + (j + 0.5) * h));
    return s * h * h;
}

struct Named {
    const char* name;
    ObservableSpec spec;
    MatrixXcd rho;
};

std::vector<Named> oracle_states() {
    return {
        {"vacuum", vacuum_char(1), projector(coherent_vector({0.0}, kCutoff))},
        {"coherent", coherent_char({cd(0.8, -0.4)}), projector(coherent_vector({cd(0.8, -0.4)}, kCutoff))},
        {"squeezed", squeezed_char({0.6}), projector(squeezed_vector(0.6, kCutoff))},
        {"thermal", thermal_state_char(1.5, 1), thermal_density(1.5, 1, kCutoff).data},
    };
}

}  // namespace

TEST(ThermalChar, TraceExample) {
    const ObservableSpec O = thermal_char(std::log(2.0), 1);
    EXPECT_NEAR(O.eval(v2(0, 0)).real(), 2.0, 1e-14);
    EXPECT_NEAR(O.trace().real(), 2.0, 1e-14);
    const ObservableSpec O3 = thermal_char(0.4, 3);
    EXPECT_NEAR(O3.trace().real(), std::pow(1 - std::exp(-0.4), -3), 1e-12);
}

TEST(ThermalChar, NonPositiveBeta) {
    try {
        thermal_char(0.0, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonPositiveBeta);
    }
}

TEST(ThermalChar, MatchesOracle) {
    const double beta = 0.5;
    const ObservableSpec O = thermal_char(beta, 1);
    const MatrixXcd Of = thermal_operator(beta, 1, kCutoff).data;
    for (const auto& xi : {v2(0, 0), v2(0.3, -0.2), v2(0.7, 0.5)})
        EXPECT_NEAR(std::abs(O.eval(xi) - oracle_char(Of, xi, kCutoff)), 0.0, 1e-6);
}

TEST(Norms, ThermalL1AgainstQuadrature) {
    // The published closed form 2^n (1 + e^{-beta})^n does not integrate |c_O|;
    // the true value (2 / (1 + e^{-beta}))^n is pinned against a Riemann sum.
    for (double beta : {0.5, 1.0, 2.0}) {
        const ObservableSpec O = thermal_char(beta, 1);
        const double brute = grid_integral([&](const VectorXd& x) { return std::abs(O.eval(x)); });
        const Norms nm = norms(O);
        EXPECT_NEAR(nm.l1, brute, 1e-6 * brute);
        EXPECT_NEAR(nm.l1, 2 / (1 + std::exp(-beta)), 1e-12);
    }
    EXPECT_NEAR(norms(thermal_char(0.5, 2)).l1, std::pow(2 / (1 + std::exp(-0.5)), 2), 1e-12);
}

TEST(Norms, ThermalPurity) {
    for (int n : {1, 2, 3})
        for (double beta : {0.1, 0.5, 2.0})
            EXPECT_NEAR(norms(thermal_char(beta, n)).l2sq, std::pow(1 - std::exp(-2 * beta), -n),
                        1e-10 * std::pow(1 - std::exp(-2 * beta), -n));
}

TEST(Norms, StatePurities) {
    EXPECT_NEAR(norms(vacuum_char(1)).l2sq, 1.0, 1e-10);
    EXPECT_NEAR(norms(coherent_char({cd(1.2, 0.3), cd(-0.5, 0)})).l2sq, 1.0, 1e-10);
    EXPECT_NEAR(norms(squeezed_char({0.9})).l2sq, 1.0, 1e-10);
    EXPECT_NEAR(norms(thermal_state_char(1.5, 1)).l2sq, 1 / (2 * 1.5 + 1), 1e-10);
    const MatrixXcd rho = thermal_density(1.5, 1, kCutoff).data;
    EXPECT_NEAR(norms(thermal_state_char(1.5, 1)).l2sq, (rho * rho).trace().real(), 1e-6);
}

TEST(Norms, MultiTermL1Quadrature) {
    ObservableSpec s = coherent_char({cd(0.5, 0)});
    const ObservableSpec t = coherent_char({cd(-0.3, 0.6)});
    s.terms.push_back(t.terms[0]);
    s.terms[1].amp = -0.5;
    const Norms nm = norms(s);
    const double brute = grid_integral([&](const VectorXd& x) { return std::abs(s.eval(x)); });
    EXPECT_NEAR(nm.l1, brute, 1e-5 * brute);
    EXPECT_LE(nm.l1_error, 1e-6 * nm.l1);
}

TEST(GaussianState, UnitTraceAndVacuumDecay) {
    for (const auto& s : oracle_states()) EXPECT_NEAR(std::abs(s.spec.eval(v2(0, 0)) - 1.0), 0.0, 1e-12) << s.name;
    EXPECT_NEAR(std::abs(vacuum_char(1).eval(v2(0.6, 0.8))), std::exp(-kPi / 2), 1e-12);
    EXPECT_NEAR(std::exp(-kPi / 2), 0.2079, 1e-4);
}

TEST(GaussianState, OracleAgreement) {
    Rng rng = make_stream(12, 0);
    for (const auto& s : oracle_states()) {
        for (int k = 0; k < 20; ++k) {
            const double r = 2 * std::sqrt(uniform01(rng)), th = 2 * kPi * uniform01(rng);
            const VectorXd xi = v2(r * std::cos(th), r * std::sin(th));
            EXPECT_LT(std::abs(s.spec.eval(xi) - oracle_char(s.rho, xi, kCutoff)), 1e-6) << s.name;
        }
    }
}

TEST(GaussianState, InadmissibleCovariance) {
    try {
        gaussian_state_char(MatrixXd::Identity(2, 2) * 0.2, VectorXd::Zero(2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InadmissibleCovariance);
    }
}

TEST(Eval, HermitianSymmetry) {
    Rng rng = make_stream(13, 0);
    const std::vector<ObservableSpec> specs = {coherent_char({cd(0.8, -0.4)}), squeezed_char({0.6}),
                                               thermal_char(0.3, 1), thermal_state_char(0.7, 1)};
    for (const auto& s : specs)
        for (int k = 0; k < 1000; ++k) {
            const VectorXd xi = v2(normal01(rng), normal01(rng));
            ASSERT_LT(std::abs(s.eval(VectorXd(-xi)) - std::conj(s.eval(xi))), 1e-12);
        }
}

TEST(Eval, DimensionMismatch) {
    try {
        vacuum_char(2).eval(v2(0, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
}

TEST(EffectiveSqueezing, Examples) {
    ObservableSpec one = vacuum_char(1);
    one.terms[0].G.setZero();
    EXPECT_EQ(effective_squeezing(one, v2(1, 0)), 0.0);
    EXPECT_NEAR(effective_squeezing(vacuum_char(1), v2(0.6, 0.8)), 1.0, 1e-12);
    EXPECT_TRUE(std::isinf(effective_squeezing(vacuum_char(1), v2(30, 0))));
}

TEST(EffectiveSqueezing, RegularizedGkpDecreasesWithBeta) {
    // Square GKP stabilizer vector (1, 0); the Fock-oracle regularized state gets
    // more translation invariant as the envelope widens.
    const SymplecticBasis b(MatrixXd::Identity(2, 2));
    double prev = std::numeric_limits<double>::infinity();
    for (double beta : {0.4, 0.25, 0.15}) {
        const GkpState g = gkp_state(b, beta, 6.0, kCutoff);
        const MatrixXcd rho = projector(g.psi);
        const double c = std::abs(oracle_char(rho, v2(1, 0), kCutoff));
        const double d2 = -(2 / kPi) * std::log(c);
        EXPECT_LT(d2, prev) << beta;
        EXPECT_LT(d2, 1.0);
        prev = d2;
    }
}

TEST(Decay, MultiplesOfBasisVectors) {
    Rng rng = make_stream(14, 0);
    for (const auto& s : oracle_states()) {
        for (int trial = 0; trial < 20; ++trial) {
            const double th = 2 * kPi * uniform01(rng);
            const VectorXd xi = v2(std::cos(th), std::sin(th)) * (0.3 + uniform01(rng));
            const double base = std::abs(s.spec.eval(xi));
            for (int k = 1; k <= 5; ++k) EXPECT_LE(std::abs(s.spec.eval(VectorXd(k * xi))), std::pow(base, k) + 1e-15);
        }
    }
}

TEST(Factorize, TensorProductAndMarginal) {
    const ObservableSpec A = coherent_char({cd(0.2, 0.1)}), B = thermal_char(0.5, 1);
    const ObservableSpec AB = tensor_product({A, B});
    ASSERT_EQ(AB.n, 2);
    const VectorXd xi = (VectorXd(4) << 0.3, -0.2, 0.1, 0.4).finished();
    EXPECT_LT(std::abs(AB.eval(xi) - A.eval(v2(xi[0], xi[2])) * B.eval(v2(xi[1], xi[3]))), 1e-14);
    EXPECT_TRUE(factorize(AB).has_value());
    const ObservableSpec m = marginal(AB, {1});
    EXPECT_LT(std::abs(m.eval(v2(0.2, 0.3)) - B.eval(v2(0.2, 0.3))), 1e-14);
}
