// Truncated-Fock oracle: displacement algebra, regularized GKP states and
// overlaps.

#include <gtest/gtest.h>

#include <cstdio>

#include "gkpshadow/fock.hpp"
#include "gkpshadow/lattice_random.hpp"
#include "gkpshadow/lattice_sum.hpp"

using namespace gkps;

namespace {

constexpr int kCutoff = 60;
// the regularized state's photon weight falls like e^{-2 beta n}; beta = 0.1
// needs about 100 photons to keep the weight near the cutoff below 1e-6
constexpr int kWide = 100;

SymplecticBasis z2() { return SymplecticBasis(MatrixXd::Identity(2, 2)); }
VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

VectorXd random_vec(Rng& rng, int d, double rmax) {
    VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = normal01(rng);
    return x.normalized() * rmax * std::sqrt(uniform01(rng));
}

double mean_photons(const VectorXcd& psi) {
    double s = 0;
    for (int k = 0; k < psi.size(); ++k) s += k * std::norm(psi[k]);
    return s;
}

}  // namespace

TEST(Displacement, ZeroIsIdentity) {
    const FockMatrix D = displacement_matrix(v2(0, 0), kCutoff);
    EXPECT_LT((D.data - MatrixXcd::Identity(D.dim(), D.dim())).norm(), 1e-15);
}

TEST(Displacement, VacuumElement) {
    Rng rng = make_stream(31, 0);
    for (int k = 0; k < 50; ++k) {
        const VectorXd xi = random_vec(rng, 2, 2.0);
        const cd v = displacement_matrix(xi, kCutoff).data(0, 0);
        EXPECT_NEAR(std::abs(v - std::exp(-kPi * xi.squaredNorm() / 2)), 0.0, 1e-8);
    }
}

TEST(Displacement, InteriorUnitarity) {
    // With amplitude sqrt(pi) ||xi|| the interior (<= 30 photons) stays inside
    // cutoff 60 only for ||xi|| up to about 0.6.
    Rng rng = make_stream(32, 0);
    for (int k = 0; k < 50; ++k)
        EXPECT_LT(interior_unitarity_error(displacement_matrix(random_vec(rng, 2, 0.6), kCutoff)), 1e-6);
}

TEST(Displacement, CompositionLawSingleMode) {
    Rng rng = make_stream(33, 0);
    for (int k = 0; k < 100; ++k)
        ASSERT_LT(composition_residual(random_vec(rng, 2, 0.6), random_vec(rng, 2, 0.6), kCutoff), 1e-6) << k;
}

TEST(Displacement, CompositionLawTwoModes) {
    Rng rng = make_stream(34, 0);
    for (int k = 0; k < 5; ++k)
        EXPECT_LT(composition_residual(random_vec(rng, 4, 0.3), random_vec(rng, 4, 0.3), 24), 1e-6);
}

TEST(Displacement, ShapeErrors) {
    EXPECT_THROW(displacement_matrix(VectorXd::Zero(6), 10), Error);
    try {
        displacement_matrix(v2(0, 0), 500);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CutoffTooSmall);
    }
}

TEST(GkpState, PhotonNumberDecreasesWithBeta) {
    double prev = std::numeric_limits<double>::infinity();
    for (double beta : {0.15, 0.25, 0.4}) {
        const GkpState g = gkp_state(z2(), beta, 6.0, kCutoff);
        const double nbar = mean_photons(g.psi);
        EXPECT_TRUE(std::isfinite(nbar));
        EXPECT_LT(nbar, prev);
        prev = nbar;
    }
}

TEST(GkpState, StabilizerExpectationApproachesOne) {
    double prev = -1;
    for (double beta : {0.4, 0.25, 0.15, 0.1}) {
        const GkpState g = gkp_state(z2(), beta, 6.0, kWide);
        const cd e = (g.psi.adjoint() * displacement_matrix(v2(1, 0), kWide).data * g.psi)(0);
        EXPECT_LT(std::abs(e.imag()), 1e-8);
        EXPECT_GT(e.real(), prev);
        prev = e.real();
    }
    EXPECT_GT(prev, 0.85);
}

TEST(GkpState, CutoffGuard) {
    try {
        gkp_state(z2(), 0.1, 6.0, kCutoff);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CutoffTooSmall);
    }
}

TEST(GkpState, SpectralGap) {
    for (double beta : {0.1, 0.2, 0.4}) EXPECT_GT(gkp_state(z2(), beta, 6.0, kWide).gap, 10.0) << beta;
}

TEST(GkpState, GaugeConsistentUnderEvenShear) {
    // An even shear keeps every stabilizer phase; an odd shear would move the
    // code state by half a period.
    MatrixXd S(2, 2);
    S << 1, 2, 0, 1;
    const GkpState a = gkp_state(z2(), 0.2, 6.0, kCutoff);
    const GkpState b = gkp_state(SymplecticBasis(S), 0.2, 6.0, kCutoff);
    EXPECT_GT(std::norm(a.psi.dot(b.psi)), 1 - 1e-6);
}

TEST(GkpState, Errors) {
    EXPECT_THROW(gkp_state(z2(), 0.0, 6.0, kCutoff), Error);
    EXPECT_THROW(gkp_state(z2(), 0.2, 0.5, kCutoff), Error);
}

TEST(OverlapTraces, ThermalTrace) {
    const FockMatrix R = thermal_operator(1.0, 1, kCutoff);
    const OverlapTraces t = overlap_and_traces(R, R);
    EXPECT_NEAR(t.trace_a.real(), 1 / (1 - std::exp(-1.0)), std::exp(-61.0) / (1 - std::exp(-1.0)) + 1e-12);
    EXPECT_NEAR(t.trace_ab.real(), 1 / (1 - std::exp(-2.0)), 1e-12);
}

TEST(OverlapTraces, PureStatePurity) {
    const FockMatrix rho{1, kCutoff, projector(coherent_vector({cd(1.1, -0.4)}, kCutoff))};
    EXPECT_NEAR(overlap_and_traces(rho, rho).trace_ab.real(), 1.0, 1e-10);
    const FockMatrix sq{1, kCutoff, projector(squeezed_vector(0.5, kCutoff))};
    EXPECT_NEAR(overlap_and_traces(sq, sq).trace_ab.real(), 1.0, 1e-10);
}

TEST(OverlapTraces, GkpExpectationMatchesLatticeSum) {
    const double beta = 0.15;
    const cd a{0.4, -0.3};
    const GkpState g = gkp_state(z2(), beta, 6.0, kCutoff);
    const FockMatrix code{1, kCutoff, projector(g.psi)};
    const FockMatrix rho{1, kCutoff, projector(coherent_vector({a}, kCutoff))};
    const double oracle = overlap_and_traces(code, rho).expect_b.real();
    const double lat = pointer_overlap(z2(), v2(0, 0), regularized_coherent_char({a}, beta), 1e-12).value.real() /
                       pointer_overlap(z2(), v2(0, 0), thermal_char(2 * beta, 1), 1e-12).value.real();
    EXPECT_NEAR(lat, oracle, 1e-3 * oracle);
}

TEST(OverlapTraces, DimensionMismatch) {
    EXPECT_THROW(overlap_and_traces(thermal_operator(1, 1, 10), thermal_operator(1, 1, 12)), Error);
}

TEST(ConjectureProbe, Families) {
    const std::vector<SymplecticBasis> bases{z2()};
    std::vector<std::pair<std::string, FockMatrix>> states;
    states.emplace_back("vacuum", FockMatrix{1, kWide, projector(coherent_vector({0.0}, kWide))});
    states.emplace_back("coherent", FockMatrix{1, kWide, projector(coherent_vector({cd(1.5, 0)}, kWide))});
    for (double beta : {0.1, 0.15, 0.25, 0.4})
        states.emplace_back("gkp", FockMatrix{1, kWide, projector(gkp_state(z2(), beta, 7.0, kWide).psi)});
    const auto rows = conjecture_probe(states, bases);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_TRUE(std::isinf(rows[0].ratio));
    EXPECT_FALSE(rows[0].counter_signal);
    EXPECT_NEAR(rows[1].nbar, 2.25, 1e-8);
    for (const auto& r : rows) {
        EXPECT_GE(r.min_delta_sq, 0.0);
        EXPECT_EQ(r.counter_signal, r.ratio < 1.0);
    }
}

TEST(BinaryDump, RoundTrip) {
    const FockMatrix D = displacement_matrix(v2(0.3, -0.2), 8);
    const std::string path = ::testing::TempDir() + "/gkps_dump.bin";
    dump_binary(D, path);
    const FockMatrix back = load_binary(path, 1, 8);
    EXPECT_EQ(back.data, D.data);
    std::remove(path.c_str());
}
