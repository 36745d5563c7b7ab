#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "apegp/rng.hpp"
#include "apegp/testfns.hpp"

using namespace apegp;

namespace {

const std::vector<double> kA(kCornerPeakA10.begin(), kCornerPeakA10.end());

// Written out term by term, independent of franke2d.
double franke_direct(double x, double y) {
    const double t1 = 0.75 * std::exp(-std::pow(9 * x - 2, 2) / 4 - std::pow(9 * y - 2, 2) / 4);
    const double t2 = 0.75 * std::exp(-std::pow(9 * x + 1, 2) / 49 - std::pow(9 * y + 1, 2) / 10);
    const double t3 = 0.5 * std::exp(-std::pow(9 * x - 7, 2) / 4 - std::pow(9 * y - 3, 2) / 4);
    const double t4 = -0.2 * std::exp(-std::pow(9 * x - 4, 2) - std::pow(9 * y - 7, 2));
    return t1 + t2 + t3 + t4;
}

}  // namespace

TEST(CornerPeak, OneAtOrigin) {
    const std::vector<double> x(10, 0.0);
    EXPECT_EQ(corner_peak(x, kA), 1.0);
}

TEST(CornerPeak, CoefficientsSumTo185) {
    EXPECT_NEAR(std::accumulate(kA.begin(), kA.end(), 0.0), 1.85, 1e-14);
}

TEST(CornerPeak, AllOnesMatchesHighPrecision) {
    const std::vector<double> x(10, 1.0);
    const double expected = 9.92445209859960535574e-6;  // 2.85^-11 at 40 digits
    EXPECT_NEAR(corner_peak(x, kA), expected, 1e-14 * expected);
}

TEST(CornerPeak, DecreasingAlongEveryAxisWithinUnitRange) {
    for (std::size_t j = 0; j < 10; ++j) {
        std::vector<double> x(10, 0.2);
        double prev = 2.0;
        for (int k = 0; k <= 50; ++k) {
            x[j] = k / 50.0;
            const double v = corner_peak(x, kA);
            EXPECT_LT(v, prev);
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
            prev = v;
        }
    }
}

TEST(CornerPeak, DomainChecks) {
    EXPECT_THROW(corner_peak(std::vector<double>(10, 1.1), kA), InvalidArgument);
    EXPECT_THROW(corner_peak(std::vector<double>(9, 0.5), kA), InvalidArgument);
    EXPECT_THROW(corner_peak(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, -1.0}), InvalidArgument);
}

TEST(Franke2d, TermStructure) {
    // first exponent vanishes at (2/9, 2/9)
    const double x = 2.0 / 9.0;
    const double rest = franke_direct(x, x) - 0.75;
    EXPECT_NEAR(franke2d(x, x) - rest, 0.75, 1e-15);
    // fourth exponent vanishes at (4/9, 7/9)
    const double t4 = -0.2 * std::exp(-std::pow(9 * (4.0 / 9.0) - 4, 2) - std::pow(9 * (7.0 / 9.0) - 7, 2));
    EXPECT_NEAR(t4, -0.2, 1e-15);
    EXPECT_NEAR(franke2d(4.0 / 9.0, 7.0 / 9.0), franke_direct(4.0 / 9.0, 7.0 / 9.0), 1e-15);
}

TEST(Franke2d, CenterMatchesHighPrecision) { EXPECT_NEAR(franke2d(0.5, 0.5), 0.11201159918660236371, 1e-15); }

TEST(Franke4d, HighPrecisionPoint) {
    const std::array<double, 4> x{0.1, 0.2, 0.3, 0.4};
    EXPECT_NEAR(franke4d(x), 1.28957216584778589406, 2e-15);
}

TEST(Franke4d, SymmetryAndAdditivity) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform(), e = rng.uniform();
        const std::array<double, 4> same{a, b, a, b};
        EXPECT_EQ(franke4d(same), 2.0 * franke2d(a, b));
        const std::array<double, 4> x{a, b, c, e};
        EXPECT_LE(std::abs(franke4d(x) - franke2d(a, b) - franke2d(c, e)), 1e-15);
        EXPECT_NEAR(franke4d(x), franke_direct(a, b) + franke_direct(c, e), 1e-14);
    }
    const std::array<double, 4> y{2.0 / 9, 2.0 / 9, 4.0 / 9, 7.0 / 9};
    EXPECT_EQ(franke4d(y), franke2d(2.0 / 9, 2.0 / 9) + franke2d(4.0 / 9, 7.0 / 9));
}

TEST(Targets, FiniteAndDeterministicOnAMillionPoints) {
    for (const auto& name : registered_targets()) {
        const TargetFunction f = make_target(name);
        Rng rng(derive_seed(5, name, 0));
        std::vector<double> x(f.dim);
        double checksum1 = 0.0;
        for (int i = 0; i < 1'000'000 / 3; ++i) {
            for (auto& v : x) v = rng.uniform();
            const double y = f(x);
            ASSERT_TRUE(std::isfinite(y)) << name;
            checksum1 += y;
        }
        Rng again(derive_seed(5, name, 0));
        double checksum2 = 0.0;
        for (int i = 0; i < 1'000'000 / 3; ++i) {
            for (auto& v : x) v = again.uniform();
            checksum2 += f(x);
        }
        EXPECT_EQ(checksum1, checksum2) << name;
    }
}

TEST(Targets, RegistryLookup) {
    EXPECT_EQ(make_target("corner-peak-10d").dim, 10u);
    EXPECT_EQ(make_target("franke-2d").dim, 2u);
    EXPECT_EQ(make_target("franke-4d").dim, 4u);
    EXPECT_EQ(make_target("corner-peak-10d").params.size(), 10u);
    EXPECT_THROW(make_target("rosenbrock"), InvalidArgument);
    const TargetFunction f = make_target("franke-4d");
    EXPECT_THROW(f(std::vector<double>{0.1, 0.2}), InvalidArgument);
}

TEST(Targets, CustomCornerPeakCoefficients) {
    const TargetFunction f = make_corner_peak({1.0, 2.0});
    EXPECT_EQ(f.name, "corner-peak-2d");
    EXPECT_NEAR(f(std::vector<double>{1.0, 1.0}), std::pow(4.0, -3.0), 1e-16);
}
