#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apegp/errors.hpp"
#include "apegp/kernel.hpp"
#include "apegp/nelder_mead.hpp"
#include "apegp/rng.hpp"

namespace apegp {

/// Regression functions f_1..f_p of the mean trend mu(x) = sum_k beta_k f_k(x).
struct TrendBasis {
    enum class Kind { Constant, Linear };

    Kind kind = Kind::Constant;
    Eigen::Index dim = 1;

    static TrendBasis constant(Eigen::Index d) { return {Kind::Constant, d}; }
    static TrendBasis linear(Eigen::Index d) { return {Kind::Linear, d}; }

    /// Number of basis functions p.
    [[nodiscard]] Eigen::Index size() const noexcept { return kind == Kind::Constant ? 1 : dim + 1; }

    template <class V>
    [[nodiscard]] Eigen::RowVectorXd eval(const Eigen::MatrixBase<V>& x) const {
        if (x.size() != dim) throw InvalidArgument("TrendBasis::eval: dimension mismatch");
        Eigen::RowVectorXd f(size());
        f[0] = 1.0;
        if (kind == Kind::Linear)
            for (Eigen::Index j = 0; j < dim; ++j) f[j + 1] = x(j);
        return f;
    }

    /// n x p matrix F with F(i, k) = f_k(x_i).
    [[nodiscard]] Eigen::MatrixXd matrix(const Eigen::MatrixXd& design) const {
        if (design.cols() != dim) throw InvalidArgument("TrendBasis::matrix: dimension mismatch");
        Eigen::MatrixXd F(design.rows(), size());
        F.col(0).setOnes();
        if (kind == Kind::Linear) F.rightCols(dim) = design;
        return F;
    }
};

struct ThetaBounds {
    double lo = 1e-2;
    double hi = 1e2;
};

struct FitConfig {
    double jitter = 1e-8;
    std::vector<ThetaBounds> theta_bounds;  // one per dimension; empty means the default for all
    int multistarts = 5;
    int max_evals = 400;                    // per start
    std::uint64_t seed = 0;                 // drives the space-filling start points

    void validate(Eigen::Index d) const {
        if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw InvalidArgument("FitConfig: jitter must be >= 0");
        if (multistarts < 1) throw InvalidArgument("FitConfig: multistarts must be >= 1");
        if (max_evals < 1) throw InvalidArgument("FitConfig: max_evals must be >= 1");
        if (!theta_bounds.empty() && static_cast<Eigen::Index>(theta_bounds.size()) != d)
            throw InvalidArgument("FitConfig: theta_bounds length must equal the input dimension");
        for (const auto& b : theta_bounds)
            if (!(b.lo > 0.0) || !(b.hi >= b.lo) || !std::isfinite(b.hi))
                throw InvalidArgument("FitConfig: theta bounds need 0 < lo <= hi < inf");
    }

    [[nodiscard]] ThetaBounds bounds(Eigen::Index j) const {
        return theta_bounds.empty() ? ThetaBounds{} : theta_bounds[static_cast<std::size_t>(j)];
    }
};

inline constexpr double kMaxJitter = 1e-4;

/// Lower Cholesky factor of R + jitter * I, with the jitter that succeeded.
struct CholeskyFactor {
    Eigen::MatrixXd lower;
    double jitter = 0.0;

    [[nodiscard]] double log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }

    template <class M>
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixBase<M>& b) const {
        const auto L = lower.triangularView<Eigen::Lower>();
        return L.transpose().solve(L.solve(b));
    }

    [[nodiscard]] Eigen::MatrixXd inverse() const {
        return solve(Eigen::MatrixXd::Identity(lower.rows(), lower.rows()));
    }
};

/// Factorizes the correlation matrix. On failure the jitter is raised
/// tenfold until kMaxJitter; a zero starting jitter is never raised.
inline CholeskyFactor corr_matrix(const Eigen::MatrixXd& design, const CorrelationParams& params,
                                  double jitter) {
    if (design.rows() < 1) throw InvalidArgument("corr_matrix: empty design");
    if (!(jitter >= 0.0)) throw InvalidArgument("corr_matrix: jitter must be >= 0");
    Eigen::MatrixXd R = correlation_matrix(design, params, 0.0);
    double current = jitter;
    while (true) {
        R.diagonal().setConstant(1.0 + current);
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() == Eigen::Success) {
            Eigen::MatrixXd L = llt.matrixL();
            if (L.diagonal().allFinite()) return {std::move(L), current};
        }
        const double next = current * 10.0;
        if (current == 0.0 || next > kMaxJitter * (1.0 + 1e-12))
            throw IllConditionedMatrix("correlation matrix is not positive definite", current);
        current = next;
    }
}

struct ProfileEstimates {
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
};

struct LogLikelihood {
    double value = 0.0;
    bool degenerate = false;  // sigma2 == 0: responses lie in the trend span, value is +inf
};

namespace detail {

// Exact-fit check on the unweighted least-squares residual: if y is in
// span(F) up to rounding, every generalized LS fit reproduces it and the
// profile variance is zero regardless of theta.
struct TrendSpanCheck {
    bool in_span = false;
    Eigen::VectorXd beta;
};

inline TrendSpanCheck check_trend_span(const Eigen::MatrixXd& F, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(F);
    if (qr.rank() < F.cols()) throw DegenerateTrend("trend basis matrix is rank deficient");
    TrendSpanCheck out;
    out.beta = qr.solve(y);
    const double scale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    const double resid = (y - F * out.beta).cwiseAbs().maxCoeff();
    out.in_span = resid <= 64.0 * std::numeric_limits<double>::epsilon() * scale;
    return out;
}

struct Profile {
    CholeskyFactor chol;
    Eigen::MatrixXd whitened_trend;    // L^-1 F
    Eigen::MatrixXd trend_precision;   // (F^T R^-1 F)^-1
    Eigen::VectorXd beta;
    Eigen::VectorXd weights;           // R^-1 (y - F beta)
    double sigma2 = 0.0;
    bool degenerate = false;
};

inline Profile profile(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::MatrixXd& F,
                       const CorrelationParams& params, double jitter) {
    const Eigen::Index n = design.rows();
    if (y.size() != n) throw InvalidArgument("responses length does not match design");
    if (n < F.cols()) throw InsufficientData("need at least p design points");
    Profile out;
    out.chol = corr_matrix(design, params, jitter);
    const auto L = out.chol.lower.triangularView<Eigen::Lower>();
    out.whitened_trend = L.solve(F);
    const Eigen::MatrixXd gram = out.whitened_trend.transpose() * out.whitened_trend;
    Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);
    if (gram_ldlt.info() != Eigen::Success || !gram_ldlt.isPositive() ||
        gram_ldlt.vectorD().minCoeff() <= 1e-14 * gram_ldlt.vectorD().maxCoeff())
        throw DegenerateTrend("F^T R^-1 F is rank deficient");
    out.trend_precision = gram_ldlt.solve(Eigen::MatrixXd::Identity(F.cols(), F.cols()));

    const TrendSpanCheck span = check_trend_span(F, y);
    if (span.in_span) {
        out.beta = span.beta;
        out.weights = Eigen::VectorXd::Zero(n);
        out.sigma2 = 0.0;
        out.degenerate = true;
        return out;
    }
    const Eigen::VectorXd yt = L.solve(y);
    out.beta = gram_ldlt.solve(out.whitened_trend.transpose() * yt);
    const Eigen::VectorXd resid_t = yt - out.whitened_trend * out.beta;
    out.sigma2 = resid_t.squaredNorm() / static_cast<double>(n);
    out.weights = out.chol.lower.transpose().triangularView<Eigen::Upper>().solve(resid_t);
    return out;
}

inline double concentrated_value(const Profile& p, Eigen::Index n) {
    if (p.degenerate) return std::numeric_limits<double>::infinity();
    const double nd = static_cast<double>(n);
    return -0.5 * nd * std::log(2.0 * std::numbers::pi * p.sigma2) - 0.5 * p.chol.log_det() - 0.5 * nd;
}

}  // namespace detail

/// Generalized least squares beta-hat and the ML variance sigma2-hat at fixed theta.
inline ProfileEstimates profile_estimates(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                          const TrendBasis& basis, const CorrelationParams& params,
                                          double jitter) {
    const auto p = detail::profile(design, y, basis.matrix(design), params, jitter);
    return {p.beta, p.sigma2};
}

/// Gaussian log-likelihood with beta and sigma2 replaced by their profile
/// maximizers: -(n/2) log(2 pi sigma2) - (1/2) log det R - n/2.
inline LogLikelihood concentrated_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                         const TrendBasis& basis, const CorrelationParams& params,
                                         double jitter) {
    const auto p = detail::profile(design, y, basis.matrix(design), params, jitter);
    return {detail::concentrated_value(p, design.rows()), p.degenerate};
}

/// A GP conditioned on its design. Immutable once built.
class TrainedGP {
public:
    /// Builds the model at a fixed correlation parameter vector.
    static TrainedGP at_params(Eigen::MatrixXd design, Eigen::VectorXd y, TrendBasis basis,
                               CorrelationParams params, double jitter) {
        if (design.cols() != params.dim() || design.cols() != basis.dim)
            throw InvalidArgument("TrainedGP: dimension mismatch");
        auto prof = detail::profile(design, y, basis.matrix(design), params, jitter);
        const double ll = detail::concentrated_value(prof, design.rows());
        return TrainedGP(std::move(design), std::move(y), basis, std::move(params), std::move(prof), ll);
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return design_.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return design_.cols(); }
    [[nodiscard]] const Eigen::MatrixXd& design() const noexcept { return design_; }
    [[nodiscard]] const Eigen::VectorXd& responses() const noexcept { return y_; }
    [[nodiscard]] const TrendBasis& basis() const noexcept { return basis_; }
    [[nodiscard]] const CorrelationParams& params() const noexcept { return params_; }
    [[nodiscard]] const Eigen::VectorXd& beta() const noexcept { return prof_.beta; }
    [[nodiscard]] double sigma2() const noexcept { return prof_.sigma2; }
    [[nodiscard]] const Eigen::MatrixXd& chol() const noexcept { return prof_.chol.lower; }
    [[nodiscard]] const CholeskyFactor& factor() const noexcept { return prof_.chol; }
    [[nodiscard]] double jitter() const noexcept { return prof_.chol.jitter; }
    [[nodiscard]] const Eigen::VectorXd& weights() const noexcept { return prof_.weights; }
    [[nodiscard]] const Eigen::MatrixXd& whitened_trend() const noexcept { return prof_.whitened_trend; }
    [[nodiscard]] const Eigen::MatrixXd& trend_precision() const noexcept { return prof_.trend_precision; }
    [[nodiscard]] bool degenerate() const noexcept { return prof_.degenerate; }
    [[nodiscard]] double log_likelihood() const noexcept { return loglik_; }

private:
    TrainedGP(Eigen::MatrixXd design, Eigen::VectorXd y, TrendBasis basis, CorrelationParams params,
              detail::Profile prof, double loglik)
        : design_(std::move(design)), y_(std::move(y)), basis_(basis), params_(std::move(params)),
          prof_(std::move(prof)), loglik_(loglik) {}

    Eigen::MatrixXd design_;
    Eigen::VectorXd y_;
    TrendBasis basis_;
    CorrelationParams params_;
    detail::Profile prof_;
    double loglik_;
};

/// Maximum-likelihood fit: Nelder-Mead in log-theta space from
/// `multistarts` starting points (box center first, then a Latin hypercube
/// of the log box), keeping the best concentrated log-likelihood.
inline TrainedGP fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const TrendBasis& basis,
                     const FitConfig& config = {}) {
    const Eigen::Index n = design.rows();
    const Eigen::Index d = design.cols();
    config.validate(d);
    if (basis.dim != d) throw InvalidArgument("fit: basis dimension does not match design");
    if (y.size() != n) throw InvalidArgument("fit: responses length does not match design");
    if (n < basis.size()) throw InsufficientData("fit: need at least p = " + std::to_string(basis.size()) +
                                                 " points, got " + std::to_string(n));
    if (!y.allFinite()) throw InvalidArgument("fit: non-finite response");

    Eigen::VectorXd lo(d), hi(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        lo[j] = std::log(config.bounds(j).lo);
        hi[j] = std::log(config.bounds(j).hi);
    }
    const Eigen::VectorXd center = 0.5 * (lo + hi);
    const Eigen::MatrixXd F = basis.matrix(design);

    // sigma2 = 0 does not depend on theta, so there is nothing to optimize.
    if (detail::check_trend_span(F, y).in_span)
        return TrainedGP::at_params(design, y, basis, CorrelationParams(center.array().exp().matrix()),
                                    config.jitter);

    auto objective = [&](const Eigen::VectorXd& z) {
        try {
            const auto p = detail::profile(design, y, F, CorrelationParams(z.array().exp().matrix()),
                                           config.jitter);
            return -detail::concentrated_value(p, n);
        } catch (const IllConditionedMatrix&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<Eigen::VectorXd> starts{center};
    if (config.multistarts > 1) {
        const int m = config.multistarts - 1;
        Rng rng(config.seed);
        Eigen::MatrixXd cube(m, d);
        for (Eigen::Index j = 0; j < d; ++j) {
            std::vector<int> perm(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) perm[static_cast<std::size_t>(i)] = i;
            rng.shuffle(perm);
            for (int i = 0; i < m; ++i)
                cube(i, j) = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / m;
        }
        for (int i = 0; i < m; ++i)
            starts.emplace_back(lo.array() + cube.row(i).transpose().array() * (hi - lo).array());
    }

    NelderMeadOptions nm;
    nm.max_evals = config.max_evals;
    nm.initial_step = 0.1 * (hi - lo).maxCoeff();
    if (nm.initial_step <= 0.0) nm.initial_step = 1.0;

    NelderMeadResult best;
    for (const auto& s : starts) {
        auto r = nelder_mead_bounded(objective, s, lo, hi, nm);
        if (r.value < best.value) best = std::move(r);
    }
    if (!std::isfinite(best.value))
        throw IllConditionedMatrix("fit: correlation matrix could not be factorized from any start",
                                   config.jitter > 0.0 ? kMaxJitter : 0.0);
    return TrainedGP::at_params(design, y, basis, CorrelationParams(best.x.array().exp().matrix()), config.jitter);
}

struct Prediction {
    double mean = 0.0;
    double se = 0.0;
    bool extrapolated = false;  // x0 outside the unit box of the model's coordinates
};

/// BLUP mean mu(x0) + r(x0)^T w and universal-kriging standard error
/// sigma2 * (1 - r^T R^-1 r + u^T (F^T R^-1 F)^-1 u), u = f(x0) - F^T R^-1 r.
template <class V>
Prediction predict(const TrainedGP& model, const Eigen::MatrixBase<V>& x0) {
    if (x0.size() != model.dim()) throw InvalidArgument("predict: dimension mismatch");
    Prediction out;
    for (Eigen::Index j = 0; j < x0.size(); ++j)
        if (!(x0(j) >= 0.0 && x0(j) <= 1.0)) out.extrapolated = true;

    const Eigen::RowVectorXd f0 = model.basis().eval(x0);
    const Eigen::VectorXd r = correlation_vector(model.design(), x0, model.params());
    out.mean = f0.dot(model.beta()) + r.dot(model.weights());
    if (model.degenerate()) return out;

    const Eigen::VectorXd v = model.chol().triangularView<Eigen::Lower>().solve(r);
    const Eigen::VectorXd u = f0.transpose() - model.whitened_trend().transpose() * v;
    const double s2 = model.sigma2() * (1.0 - v.squaredNorm() + u.dot(model.trend_precision() * u));
    out.se = std::sqrt(std::max(0.0, s2));
    return out;
}

/// Predictive means for every row of `points`; skips the standard-error solve.
inline Eigen::VectorXd predict_mean(const TrainedGP& model, const Eigen::MatrixXd& points) {
    if (points.cols() != model.dim()) throw InvalidArgument("predict_mean: dimension mismatch");
    const Eigen::MatrixXd F0 = model.basis().matrix(points);
    Eigen::VectorXd out = F0 * model.beta();
    if (model.degenerate()) return out;
    const Eigen::MatrixXd pts = model.design().transpose();
    const Eigen::VectorXd inv_theta = model.params().theta().cwiseInverse();
    const Eigen::Index d = model.dim();
    Eigen::VectorXd x(d);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        x = points.row(i).transpose();
        double acc = 0.0;
        for (Eigen::Index k = 0; k < pts.cols(); ++k)
            acc += detail::correlation_fast(pts.col(k).data(), x.data(), inv_theta.data(), d) * model.weights()[k];
        out[i] += acc;
    }
    return out;
}

}  // namespace apegp
