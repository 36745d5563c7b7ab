#include <cmath>

#include <gtest/gtest.h>

#include "apegp/metrics.hpp"

using namespace apegp;

namespace {

const Eigen::VectorXd kTruth = (Eigen::VectorXd(5) << 1.0, 2.0, 4.0, -1.0, 3.0).finished();
const Eigen::VectorXd kPred = (Eigen::VectorXd(5) << 1.5, 2.0, 3.0, -1.0, 5.0).finished();

}  // namespace

TEST(Rmspe, FixedPair) {
    // squared errors 0.25, 0, 1, 0, 4 -> mean 1.05
    EXPECT_DOUBLE_EQ(rmspe(kTruth, kPred), std::sqrt(1.05));
    EXPECT_EQ(rmspe(kTruth, kTruth), 0.0);
    EXPECT_DOUBLE_EQ(rmspe(kTruth, (kTruth.array() - 0.75).matrix()), 0.75);
}

TEST(Mape, FixedPairAndDominantError) {
    EXPECT_EQ(mape(kTruth, kPred), 2.0);
    EXPECT_EQ(mape(kTruth, kTruth), 0.0);
    Eigen::VectorXd p = kPred;
    p[1] = 2.0 + 40.0;
    EXPECT_EQ(mape(kTruth, p), 40.0);
}

TEST(Metrics, LengthMismatch) {
    EXPECT_THROW(rmspe(kTruth, Eigen::VectorXd::Zero(4)), InvalidArgument);
    EXPECT_THROW(mape(kTruth, Eigen::VectorXd::Zero(6)), InvalidArgument);
    EXPECT_THROW(rmspe(Eigen::VectorXd(), Eigen::VectorXd()), InvalidArgument);
}

TEST(ScaleMetrics, MeanPredictorScoresExactlyOne) {
    const Eigen::VectorXd mean = Eigen::VectorXd::Constant(5, kTruth.mean());
    const auto s = scaled_errors(kTruth, mean);
    EXPECT_NEAR(s.rmspe, 1.0, 1e-15);
    EXPECT_NEAR(s.mape, 1.0, 1e-15);
}

TEST(ScaleMetrics, FixedPairByHand) {
    // mean 1.8; deviations -0.8, 0.2, 2.2, -2.8, 1.2; sum sq 14.8; max |dev| 2.8
    const auto s = scaled_errors(kTruth, kPred);
    EXPECT_NEAR(s.rmspe, std::sqrt(1.05) / std::sqrt(14.8 / 5.0), 1e-15);
    EXPECT_NEAR(s.mape, 2.0 / 2.8, 1e-15);
}

TEST(ScaleMetrics, AffineInvariance) {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd y(20), p(20);
        for (Eigen::Index i = 0; i < 20; ++i) {
            y[i] = rng.uniform(-1, 1);
            p[i] = y[i] + rng.uniform(-0.3, 0.3);
        }
        const double a = rng.uniform(0.1, 5.0) * (t % 2 ? -1.0 : 1.0), b = rng.uniform(-10, 10);
        const auto s0 = scaled_errors(y, p);
        const auto s1 = scaled_errors((a * y.array() + b).matrix(), (a * p.array() + b).matrix());
        EXPECT_NEAR(s0.rmspe, s1.rmspe, 1e-12);
        EXPECT_NEAR(s0.mape, s1.mape, 1e-12);
        EXPECT_LE(rmspe(y, p), mape(y, p));
    }
}

TEST(ScaleMetrics, DegenerateTestSets) {
    EXPECT_THROW(scale_metrics(Eigen::VectorXd::Constant(4, 2.0), 0.1, 0.1), DegenerateTestSet);
    EXPECT_THROW(scale_metrics(Eigen::VectorXd::Constant(1, 2.0), 0.1, 0.1), DegenerateTestSet);
}

TEST(TestSet, UniformDeterministicAndEvaluated) {
    const TargetFunction f = make_target("franke-2d");
    const TestSet a = make_test_set(f, 1000, 99);
    const TestSet b = make_test_set(f, 1000, 99);
    EXPECT_TRUE(a.points == b.points);
    EXPECT_TRUE(a.truth == b.truth);
    EXPECT_GE(a.points.minCoeff(), 0.0);
    EXPECT_LT(a.points.maxCoeff(), 1.0);
    EXPECT_NEAR(a.points.mean(), 0.5, 0.03);
    for (Eigen::Index i = 0; i < 1000; i += 97) EXPECT_EQ(a.truth[i], franke2d(a.points(i, 0), a.points(i, 1)));
    EXPECT_THROW(make_test_set(f, 1, 1), InvalidArgument);
}
