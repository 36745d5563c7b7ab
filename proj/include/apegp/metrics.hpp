#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "apegp/errors.hpp"
#include "apegp/rng.hpp"
#include "apegp/testfns.hpp"

namespace apegp {

namespace detail {

inline void check_pair(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred, const char* who) {
    if (truth.size() != pred.size()) throw InvalidArgument(std::string(who) + ": length mismatch");
    if (truth.size() == 0) throw InvalidArgument(std::string(who) + ": empty input");
}

}  // namespace detail

/// Root mean squared prediction error.
inline double rmspe(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
    detail::check_pair(truth, pred, "rmspe");
    return std::sqrt((truth - pred).squaredNorm() / static_cast<double>(truth.size()));
}

/// Maximum absolute prediction error.
inline double mape(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
    detail::check_pair(truth, pred, "mape");
    return (truth - pred).cwiseAbs().maxCoeff();
}

struct ScaledMetrics {
    double rmspe = 0.0;
    double mape = 0.0;
};

/// RMSPE over the population standard deviation of the truth (divide by n),
/// MAPE over the maximum absolute deviation of the truth from its mean.
inline ScaledMetrics scale_metrics(const Eigen::VectorXd& truth, double rmspe_val, double mape_val) {
    if (truth.size() < 2) throw DegenerateTestSet("scale_metrics: need at least 2 test responses");
    const double mean = truth.mean();
    const Eigen::ArrayXd dev = truth.array() - mean;
    const double sd = std::sqrt(dev.square().sum() / static_cast<double>(truth.size()));
    const double maxad = dev.abs().maxCoeff();
    if (!(sd > 0.0) || !(maxad > 0.0)) throw DegenerateTestSet("scale_metrics: test responses have zero variance");
    return {rmspe_val / sd, mape_val / maxad};
}

inline ScaledMetrics scaled_errors(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
    return scale_metrics(truth, rmspe(truth, pred), mape(truth, pred));
}

struct TestSet {
    Eigen::MatrixXd points;
    Eigen::VectorXd truth;
    std::uint64_t seed = 0;
};

/// n_test points drawn uniformly on [0,1]^d, with the target evaluated at each.
inline TestSet make_test_set(const TargetFunction& f, Eigen::Index n_test, std::uint64_t seed) {
    if (n_test < 2) throw InvalidArgument("make_test_set: n_test must be >= 2");
    const auto d = static_cast<Eigen::Index>(f.dim);
    Rng rng(seed);
    TestSet ts;
    ts.seed = seed;
    ts.points.resize(n_test, d);
    ts.truth.resize(n_test);
    Eigen::VectorXd x(d);
    for (Eigen::Index i = 0; i < n_test; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x[j] = rng.uniform();
        ts.points.row(i) = x.transpose();
        ts.truth[i] = f(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
    }
    return ts;
}

/// One (method, function, design size) cell of a benchmark table.
struct BenchRecord {
    std::string method;
    std::string function;
    long long n = 0;
    double rmspe_scaled = 0.0;
    double mape_scaled = 0.0;
    double time_minutes = 0.0;
    std::uint64_t seed = 0;
};

}  // namespace apegp
