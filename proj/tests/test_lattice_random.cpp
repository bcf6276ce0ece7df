// Random lattice samplers: Y_1 marginals, Siegel mean, product ensemble and
// the approximate Y_n walk.

#include <gtest/gtest.h>

#include <algorithm>

#include "gkpshadow/lattice_random.hpp"

using namespace gkps;

namespace {

// CDF of y under dx dy / y^2 on the fundamental domain, by midpoint quadrature.
double y_marginal_cdf(double y) {
    const double y0 = std::sqrt(3.0) / 2;
    if (y <= y0) return 0;
    auto w = [](double t) { return t >= 1 ? 1.0 : 1.0 - 2.0 * std::sqrt(std::max(0.0, 1.0 - t * t)); };
    const int m = 20000;
    const double top = std::min(y, 1.0);
    double acc = 0;
    const double h = (top - y0) / m;
    for (int i = 0; i < m; ++i) {
        const double t = y0 + (i + 0.5) * h;
        acc += w(t) / (t * t) * h;
    }
    if (y > 1) acc += 1.0 - 1.0 / y;
    return acc * 3.0 / kPi;
}

}  // namespace

TEST(SampleY1, UnitDeterminantAndSymplectic) {
    Rng rng = make_stream(1, 0);
    for (int k = 0; k < 10000; ++k) {
        const LatticeSample s = sample_y1(rng);
        ASSERT_LE(std::abs(std::abs(s.basis.M().determinant()) - 1.0), 1e-12);
        ASSERT_TRUE(check_symplectic(s.basis.M(), 1e-9).ok);
        ASSERT_EQ(s.kind, LatticeKind::ExactY1);
    }
}

TEST(SampleY1, YMarginalKolmogorovSmirnov) {
    Rng rng = make_stream(2, 0);
    std::vector<double> ys(100000);
    for (auto& y : ys) y = sample_y1(rng).tau_y;
    std::sort(ys.begin(), ys.end());
    double ks = 0;
    for (std::size_t i = 0; i < ys.size(); i += 50) {
        const double F = y_marginal_cdf(ys[i]);
        ks = std::max({ks, std::abs(F - double(i) / ys.size()), std::abs(F - double(i + 1) / ys.size())});
    }
    EXPECT_LT(ks, 0.01);
}

TEST(SampleY1, SiegelMeanCount) {
    Rng rng = make_stream(3, 0);
    const int N = 100000;
    const double R = 2.0;
    double s = 0, s2 = 0;
    for (int k = 0; k < N; ++k) {
        const double c = static_cast<double>(enumerate(sample_y1(rng).basis, R, false).size());
        s += c;
        s2 += c * c;
    }
    const double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_LT(std::abs(mean - kPi * R * R), 3 * se) << mean << " +- " << se;
}

TEST(SampleLocal, SingleModeMatchesY1Stream) {
    Rng a = make_stream(4, 0), b = make_stream(4, 0);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(sample_local(1, a).basis.M(), sample_y1(b).basis.M());
}

TEST(SampleLocal, GramIsStandardForm) {
    Rng rng = make_stream(5, 0);
    const MatrixXl J = symplectic_form(2).cast<long long>();
    for (int k = 0; k < 1000; ++k) {
        const LatticeSample s = sample_local(2, rng);
        ASSERT_EQ(s.basis.gram(), J);
        ASSERT_EQ(s.kind, LatticeKind::LocalProduct);
    }
}

TEST(SampleLocal, ModesUncorrelated) {
    Rng rng = make_stream(6, 0);
    const int N = 100000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::vector<MatrixXd> modes;
    for (int k = 0; k < N; ++k) {
        sample_local(2, rng, &modes);
        const double x = SymplecticBasis(modes[0]).shortest_row_norm();
        const double y = SymplecticBasis(modes[1]).shortest_row_norm();
        sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
    }
    const double cov = sxy / N - sx * sy / N / N;
    const double r = cov / std::sqrt((sxx / N - sx * sx / N / N) * (syy / N - sy * sy / N / N));
    EXPECT_LT(std::abs(r), 0.02);
}

TEST(SampleYnApprox, ZeroStepsIsLocal) {
    Rng a = make_stream(7, 0), b = make_stream(7, 0);
    for (int k = 0; k < 50; ++k) {
        const LatticeSample s = sample_yn_approx(2, 0, a);
        EXPECT_EQ(s.basis.M(), sample_local(2, b).basis.M());
        EXPECT_EQ(s.kind, LatticeKind::ApproxYn);
    }
}

TEST(SampleYnApprox, StaysSymplecticEveryStep) {
    Rng rng = make_stream(8, 0);
    SymplecticBasis b = sample_local(2, rng).basis;
    for (int k = 0; k < 200; ++k) {
        b = reduce_basis(SymplecticBasis(hecke_step(b, 2, rng) * random_symplectic_orthogonal(2, rng).transpose()));
        ASSERT_TRUE(check_symplectic(b.M(), 1e-9).ok) << "step " << k;
    }
}

TEST(SampleYnApprox, MeanValueSanity) {
    // sum_{l != 0} e^{-pi |l|^2} averages to the integral of e^{-pi |x|^2} over R^4, which is 1.
    Rng rng = make_stream(9, 0);
    const int N = 10000;
    double s = 0;
    for (int k = 0; k < N; ++k) {
        const LatticeSample L = sample_yn_approx(2, 20, rng);
        for (const auto& p : enumerate(L.basis, 3.5, false)) s += std::exp(-kPi * p.norm * p.norm);
    }
    EXPECT_NEAR(s / N, 1.0, 0.1);
}

TEST(SampleYnApprox, RejectsSingleMode) {
    Rng rng = make_stream(10, 0);
    EXPECT_THROW(sample_yn_approx(1, 5, rng), Error);
}

TEST(Streams, Reproducible) {
    Rng a = make_stream(11, 3, 2), b = make_stream(11, 3, 2), c = make_stream(11, 4, 2);
    const MatrixXd ma = sample_local(3, a).basis.M();
    EXPECT_EQ(ma, sample_local(3, b).basis.M());
    EXPECT_NE(ma, sample_local(3, c).basis.M());
    EXPECT_EQ(seed_path(11, 3, 5), "11/3/5");
}
