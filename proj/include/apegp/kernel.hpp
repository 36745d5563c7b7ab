#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "apegp/errors.hpp"

namespace apegp {

inline constexpr double kSqrt5 = 2.2360679774997896964091736687313;

/// Per-dimension length-scales of the separable Matern 5/2 correlation.
class CorrelationParams {
public:
    explicit CorrelationParams(Eigen::VectorXd theta) : theta_(std::move(theta)) {
        if (theta_.size() == 0) throw InvalidArgument("CorrelationParams: empty theta");
        for (Eigen::Index j = 0; j < theta_.size(); ++j) {
            if (!std::isfinite(theta_[j]) || theta_[j] <= 0.0)
                throw InvalidArgument("CorrelationParams: theta[" + std::to_string(j) +
                                      "] must be finite and positive");
        }
    }

    static CorrelationParams constant(Eigen::Index d, double value) {
        return CorrelationParams(Eigen::VectorXd::Constant(d, value));
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return theta_.size(); }
    [[nodiscard]] double operator[](Eigen::Index j) const { return theta_[j]; }
    [[nodiscard]] const Eigen::VectorXd& theta() const noexcept { return theta_; }

private:
    Eigen::VectorXd theta_;
};

/// (1 + sqrt5 u + 5u^2/3) exp(-sqrt5 u) with u = h / theta.
inline double matern52(double h, double theta) {
    if (!std::isfinite(h) || !std::isfinite(theta))
        throw InvalidArgument("matern52: non-finite input");
    if (h < 0.0 || theta <= 0.0)
        throw InvalidArgument("matern52: requires h >= 0 and theta > 0");
    const double u = h / theta;
    return (1.0 + kSqrt5 * u + 5.0 * u * u / 3.0) * std::exp(-kSqrt5 * u);
}

/// Product over dimensions of matern52(|x_j - x2_j|, theta_j).
template <class A, class B>
double correlation(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& x2,
                   const CorrelationParams& params) {
    if (x.size() != params.dim() || x2.size() != params.dim())
        throw InvalidArgument("correlation: dimension mismatch");
    double r = 1.0;
    for (Eigen::Index j = 0; j < params.dim(); ++j)
        r *= matern52(std::abs(x(j) - x2(j)), params[j]);
    return r;
}

namespace detail {

// Same value as correlation(), but folds the d exponentials into one:
// prod_j p(u_j) exp(-sqrt5 u_j) = prod_j p(u_j) * exp(-sqrt5 sum_j u_j).
// Inputs are columns of a d x n matrix; no validation.
inline double correlation_fast(const double* a, const double* b, const double* inv_theta,
                               Eigen::Index d) noexcept {
    double poly = 1.0;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double u = std::abs(a[j] - b[j]) * inv_theta[j];
        poly *= 1.0 + kSqrt5 * u + (5.0 / 3.0) * u * u;
        sum += u;
    }
    return poly * std::exp(-kSqrt5 * sum);
}

}  // namespace detail

/// Dense n x n correlation matrix (rows of `design` are points) with
/// `jitter` added on the diagonal. Exactly symmetric.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& design, const CorrelationParams& params,
                                          double jitter = 0.0) {
    const Eigen::Index n = design.rows();
    const Eigen::Index d = design.cols();
    if (d != params.dim()) throw InvalidArgument("correlation_matrix: dimension mismatch");
    const Eigen::MatrixXd pts = design.transpose();
    const Eigen::VectorXd inv_theta = params.theta().cwiseInverse();
    Eigen::MatrixXd R(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        R(i, i) = 1.0 + jitter;
        for (Eigen::Index k = i + 1; k < n; ++k) {
            const double r = detail::correlation_fast(pts.col(i).data(), pts.col(k).data(),
                                                      inv_theta.data(), d);
            R(i, k) = r;
            R(k, i) = r;
        }
    }
    return R;
}

/// Cross-correlations between every row of `design` and the point x0.
template <class V>
Eigen::VectorXd correlation_vector(const Eigen::MatrixXd& design, const Eigen::MatrixBase<V>& x0,
                                   const CorrelationParams& params) {
    const Eigen::Index n = design.rows();
    const Eigen::Index d = design.cols();
    if (x0.size() != d || d != params.dim())
        throw InvalidArgument("correlation_vector: dimension mismatch");
    const Eigen::VectorXd inv_theta = params.theta().cwiseInverse();
    const Eigen::VectorXd x = x0;
    Eigen::VectorXd r(n);
    Eigen::VectorXd row(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        row = design.row(i).transpose();
        r[i] = detail::correlation_fast(row.data(), x.data(), inv_theta.data(), d);
    }
    return r;
}

}  // namespace apegp
