#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apegp/design.hpp"
#include "apegp/errors.hpp"
#include "apegp/gp.hpp"
#include "apegp/rng.hpp"
#include "apegp/testfns.hpp"

namespace apegp {

enum class ErrorMeasure { MSE, MaxAbs };
enum class LooMode { ClosedForm, FullRefit };

inline double summarize_errors(const Eigen::VectorXd& residuals, ErrorMeasure measure) {
    if (residuals.size() == 0) throw InvalidArgument("summarize_errors: no residuals");
    return measure == ErrorMeasure::MSE ? residuals.squaredNorm() / static_cast<double>(residuals.size())
                                        : residuals.cwiseAbs().maxCoeff();
}

/// Leave-one-out residuals y_i - yhat_{-i} at the model's theta, with beta
/// re-estimated on every fold: e_i = (Q y)_i / Q_ii where
/// Q = R^-1 - R^-1 F (F^T R^-1 F)^-1 F^T R^-1, and Q y equals the weights w.
inline Eigen::VectorXd loo_residuals_closed_form(const TrainedGP& model) {
    const Eigen::Index n = model.size();
    if (n < 3) throw InsufficientData("leave-one-out needs at least 3 points");
    if (model.degenerate()) return Eigen::VectorXd::Zero(n);
    const auto L = model.chol().triangularView<Eigen::Lower>();
    const Eigen::MatrixXd Linv = L.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::VectorXd rinv_diag = Linv.colwise().squaredNorm().transpose();
    const Eigen::MatrixXd G = Linv.transpose() * model.whitened_trend();  // R^-1 F
    const Eigen::VectorXd correction = (G * model.trend_precision()).cwiseProduct(G).rowwise().sum();
    const Eigen::VectorXd q_diag = rinv_diag - correction;
    return model.weights().cwiseQuotient(q_diag);
}

/// Leave-one-out residuals from n complete refits (theta re-estimated per fold).
inline Eigen::VectorXd loo_residuals_refit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                           const TrendBasis& basis, const FitConfig& config) {
    const Eigen::Index n = design.rows();
    if (n < 3) throw InsufficientData("leave-one-out needs at least 3 points");
    Eigen::VectorXd res(n);
    Eigen::MatrixXd sub(n - 1, design.cols());
    Eigen::VectorXd ysub(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0, r = 0; k < n; ++k) {
            if (k == i) continue;
            sub.row(r) = design.row(k);
            ysub[r++] = y[k];
        }
        FitConfig fold = config;
        fold.seed = derive_seed(config.seed, "loo-fold", static_cast<std::uint64_t>(i));
        const TrainedGP m = fit(sub, ysub, basis, fold);
        res[i] = y[i] - predict(m, design.row(i).transpose()).mean;
    }
    return res;
}

/// Cross-validated prediction error of a GP fitted to (design, y).
inline double loo_cv_error(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const TrendBasis& basis,
                           const FitConfig& config, LooMode mode = LooMode::ClosedForm,
                           ErrorMeasure measure = ErrorMeasure::MSE) {
    if (design.rows() < 3) throw InsufficientData("leave-one-out needs at least 3 points");
    const Eigen::VectorXd res = mode == LooMode::ClosedForm
                                    ? loo_residuals_closed_form(fit(design, y, basis, config))
                                    : loo_residuals_refit(design, y, basis, config);
    return summarize_errors(res, measure);
}

struct Region {
    Box box;
    std::vector<Eigen::Index> points;  // indices into the global design
    std::optional<double> cv_error;
    std::shared_ptr<const TrainedGP> model;  // in region-local coordinates
    bool splittable = true;
};

struct SplitRecord {
    int iteration = 0;
    Eigen::Index region = 0;
    Eigen::Index dim = 0;
    double value = 0.0;
};

/// Disjoint boxes covering [0,1]^d.
struct Partition {
    std::vector<Region> regions;
    std::vector<SplitRecord> split_log;

    static Partition whole(Eigen::Index d, std::vector<Eigen::Index> points = {}) {
        Partition p;
        p.regions.push_back(Region{Box::unit(d), std::move(points), std::nullopt, nullptr, true});
        return p;
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(regions.size()); }
    [[nodiscard]] Eigen::Index dim() const { return regions.front().box.dim(); }

    [[nodiscard]] double volume() const {
        double v = 0.0;
        for (const auto& r : regions) v += r.box.volume();
        return v;
    }

    /// Region containing x under the half-open membership rule.
    template <class V>
    [[nodiscard]] Eigen::Index locate(const Eigen::MatrixBase<V>& x) const {
        if (x.size() != dim()) throw InvalidArgument("Partition::locate: dimension mismatch");
        for (Eigen::Index j = 0; j < x.size(); ++j)
            if (!(x(j) >= 0.0 && x(j) <= 1.0)) throw InvalidArgument("Partition::locate: point outside [0,1]^d");
        for (std::size_t k = 0; k < regions.size(); ++k)
            if (regions[k].box.contains(x)) return static_cast<Eigen::Index>(k);
        throw InvalidArgument("Partition::locate: no region contains the point");
    }
};

/// Full audit: volumes sum to one, boxes pairwise disjoint, and every design
/// point is listed in exactly the region that contains it. Returns an
/// empty string when valid, otherwise a description of the first problem.
inline std::string audit_partition(const Partition& p, const Eigen::MatrixXd& points) {
    if (std::abs(p.volume() - 1.0) > 1e-12) return "volumes sum to " + std::to_string(p.volume());
    for (std::size_t a = 0; a < p.regions.size(); ++a) {
        for (std::size_t b = a + 1; b < p.regions.size(); ++b) {
            const Box& A = p.regions[a].box;
            const Box& B = p.regions[b].box;
            bool overlap = true;
            for (Eigen::Index j = 0; j < A.dim(); ++j)
                if (A.hi[j] <= B.lo[j] || B.hi[j] <= A.lo[j]) overlap = false;
            if (overlap) return "regions " + std::to_string(a) + " and " + std::to_string(b) + " overlap";
        }
    }
    std::vector<int> owner(static_cast<std::size_t>(points.rows()), -1);
    for (std::size_t k = 0; k < p.regions.size(); ++k) {
        for (Eigen::Index i : p.regions[k].points) {
            if (i < 0 || i >= points.rows()) return "region " + std::to_string(k) + " lists a bad index";
            if (owner[static_cast<std::size_t>(i)] != -1) return "point " + std::to_string(i) + " listed twice";
            owner[static_cast<std::size_t>(i)] = static_cast<int>(k);
            if (!p.regions[k].box.contains(points.row(i).transpose()))
                return "point " + std::to_string(i) + " lies outside its region";
        }
    }
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] == -1) return "point " + std::to_string(i) + " is in no region";
    return {};
}

/// Picks the split dimension for a region by the within/between variance
/// ratio of the two halves of a hypothetical midpoint split:
///   V_between = sum_l (m_l - mbar)^2,  V_within = (v_1 + v_2) / 2,
/// with v_l the sample variance (n - 1 denominator). Dimensions whose split
/// leaves fewer than `min_side` points on a side are skipped. If every
/// remaining dimension has V_between == 0 the widest one wins; ties go to
/// the lowest index throughout.
inline Eigen::Index choose_split_dimension(const Box& box, std::span<const Eigen::Index> members,
                                           const Eigen::MatrixXd& points, const Eigen::VectorXd& y,
                                           Eigen::Index min_side = 2) {
    const Eigen::Index d = box.dim();
    if (points.cols() != d) throw InvalidArgument("choose_split_dimension: dimension mismatch");
    if (min_side < 2) throw InvalidArgument("choose_split_dimension: min_side must be >= 2");

    double scale = 0.0;
    for (Eigen::Index i : members) scale = std::max(scale, std::abs(y[i]));
    const double zero_between = std::pow(64.0 * std::numeric_limits<double>::epsilon() * scale, 2);

    Eigen::Index best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    Eigen::Index widest = -1;
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(box.hi[j] > box.lo[j])) continue;
        const double mid = 0.5 * (box.lo[j] + box.hi[j]);
        std::array<double, 2> sum{0.0, 0.0};
        std::array<Eigen::Index, 2> count{0, 0};
        for (Eigen::Index i : members) {
            const int side = points(i, j) < mid ? 0 : 1;
            sum[side] += y[i];
            ++count[side];
        }
        if (count[0] < min_side || count[1] < min_side) continue;
        const std::array<double, 2> mean{sum[0] / count[0], sum[1] / count[1]};
        std::array<double, 2> ss{0.0, 0.0};
        for (Eigen::Index i : members) {
            const int side = points(i, j) < mid ? 0 : 1;
            ss[side] += (y[i] - mean[side]) * (y[i] - mean[side]);
        }
        const double within = 0.5 * (ss[0] / (count[0] - 1) + ss[1] / (count[1] - 1));
        const double mbar = 0.5 * (mean[0] + mean[1]);
        const double between = (mean[0] - mbar) * (mean[0] - mbar) + (mean[1] - mbar) * (mean[1] - mbar);

        if (widest < 0 || box.hi[j] - box.lo[j] > box.hi[widest] - box.lo[widest]) widest = j;
        if (between <= zero_between) continue;
        const double ratio = within / between;
        if (best < 0 || ratio < best_ratio) {
            best = j;
            best_ratio = ratio;
        }
    }
    if (widest < 0) throw NoValidSplit("no dimension leaves enough points on both sides");
    return best >= 0 ? best : widest;
}

/// Splits region k at the midpoint of dimension j. The lower half [lo, mid)
/// keeps id k and the upper half is appended. Points are reassigned by the
/// membership rule; models and errors of both halves are cleared.
inline Partition split_region(Partition partition, Eigen::Index k, Eigen::Index j, const Eigen::MatrixXd& points,
                              int iteration = 0) {
    if (k < 0 || k >= partition.size()) throw InvalidArgument("split_region: bad region id");
    Region& parent = partition.regions[static_cast<std::size_t>(k)];
    if (j < 0 || j >= parent.box.dim()) throw InvalidArgument("split_region: bad dimension");
    if (!(parent.box.hi[j] > parent.box.lo[j])) throw InvalidArgument("split_region: zero-width dimension");

    const double mid = 0.5 * (parent.box.lo[j] + parent.box.hi[j]);
    Region lower{parent.box, {}, std::nullopt, nullptr, true};
    Region upper{parent.box, {}, std::nullopt, nullptr, true};
    lower.box.hi[j] = mid;
    upper.box.lo[j] = mid;
    for (Eigen::Index i : parent.points) (points(i, j) < mid ? lower : upper).points.push_back(i);

    partition.regions[static_cast<std::size_t>(k)] = std::move(lower);
    partition.regions.push_back(std::move(upper));
    partition.split_log.push_back({iteration, k, j, mid});
    return partition;
}

struct PartitionedPrediction {
    double mean = 0.0;
    double se = 0.0;
    Eigen::Index region = 0;
};

template <class V>
PartitionedPrediction predict_partitioned(const Partition& partition, const Eigen::MatrixBase<V>& x0) {
    const Eigen::Index k = partition.locate(x0);
    const Region& r = partition.regions[static_cast<std::size_t>(k)];
    if (!r.model) throw InvalidArgument("predict_partitioned: region " + std::to_string(k) + " has no model");
    const Prediction p = predict(*r.model, r.box.to_local(x0));
    return {p.mean, p.se, k};
}

/// Predictive means at every row of `points`, grouped by region.
inline Eigen::VectorXd predict_partitioned_mean(const Partition& partition, const Eigen::MatrixXd& points) {
    std::vector<std::vector<Eigen::Index>> groups(partition.regions.size());
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        groups[static_cast<std::size_t>(partition.locate(points.row(i).transpose()))].push_back(i);
    Eigen::VectorXd out(points.rows());
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        const Region& r = partition.regions[k];
        if (!r.model) throw InvalidArgument("predict_partitioned_mean: region without model");
        Eigen::MatrixXd local(static_cast<Eigen::Index>(groups[k].size()), points.cols());
        for (std::size_t t = 0; t < groups[k].size(); ++t)
            local.row(static_cast<Eigen::Index>(t)) = r.box.to_local(points.row(groups[k][t]).transpose()).transpose();
        const Eigen::VectorXd m = predict_mean(*r.model, local);
        for (std::size_t t = 0; t < groups[k].size(); ++t) out[groups[k][t]] = m[static_cast<Eigen::Index>(t)];
    }
    return out;
}

struct ApeConfig {
    Eigen::Index n0 = 100;
    Eigen::Index max_size = 1000;  // N: stop once the design reaches this size
    ErrorMeasure error_measure = ErrorMeasure::MSE;
    std::uint64_t seed = 1;
    FitConfig fit;
    LooMode loo_mode = LooMode::ClosedForm;
    TrendBasis::Kind trend = TrendBasis::Kind::Constant;

    /// Smallest number of points either child of a split may hold.
    [[nodiscard]] Eigen::Index min_side(Eigen::Index d) const { return TrendBasis{trend, d}.size() + 2; }

    void validate(Eigen::Index d) const {
        fit.validate(d);
        if (n0 < min_side(d)) throw InvalidArgument("ApeConfig: n0 must be at least p + 2");
        if (max_size < n0) throw InvalidArgument("ApeConfig: N must be >= n0");
    }
};

struct TraceRecord {
    int iter = 0;
    Eigen::Index n = 0;  // design size after the iteration
    Eigen::Index K = 0;  // region count after the iteration
    Eigen::Index region_id = 0;
    Eigen::Index dim = 0;
    double split_value = 0.0;
    Eigen::Index added = 0;
    std::array<double, 2> child_errors{};
    std::vector<double> errors;  // e_k of every region after the iteration
    double elapsed_s = 0.0;      // wall time of the iteration
    double eval_s = 0.0;         // part of elapsed_s spent evaluating the target
};

struct ApeResult {
    Partition partition;
    Eigen::MatrixXd points;
    Eigen::VectorXd responses;
    std::vector<int> added_at;  // iteration that added each point (0 = initial LHD)
    std::vector<TraceRecord> trace;
    double initial_s = 0.0;     // wall time of the initial design + fit
    double initial_eval_s = 0.0;
    bool exhausted = false;     // stopped because no region could be split

    [[nodiscard]] Eigen::Index size() const noexcept { return points.rows(); }
    [[nodiscard]] int iterations() const noexcept { return static_cast<int>(trace.size()); }

    [[nodiscard]] Design design(std::uint64_t seed = 0) const {
        return Design{points, {Provenance::Kind::APE, 0, iterations()}, seed};
    }

    /// Wall time excluding target evaluations, through the current iteration.
    [[nodiscard]] double algorithm_seconds() const {
        double s = initial_s - initial_eval_s;
        for (const auto& t : trace) s += t.elapsed_s - t.eval_s;
        return s;
    }
};

/// Target evaluation failed; the partial run up to that point is attached.
class ApeAborted : public std::runtime_error {
public:
    ApeAborted(const std::string& what, ApeResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    [[nodiscard]] const ApeResult& partial() const noexcept { return partial_; }

private:
    ApeResult partial_;
};

/// Called after the initial fit and after every split; return false to stop.
using ApeObserver = std::function<bool(const ApeResult&)>;

namespace detail {

inline void fit_region(Region& region, const Eigen::MatrixXd& points, const Eigen::VectorXd& y,
                       const ApeConfig& cfg, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(region.points.size());
    const Eigen::Index d = points.cols();
    Eigen::MatrixXd local(n, d);
    Eigen::VectorXd ylocal(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index i = region.points[static_cast<std::size_t>(t)];
        local.row(t) = region.box.to_local(points.row(i).transpose()).transpose();
        ylocal[t] = y[i];
    }
    FitConfig fc = cfg.fit;
    fc.seed = seed;
    const TrendBasis basis{cfg.trend, d};
    auto model = std::make_shared<const TrainedGP>(fit(local, ylocal, basis, fc));
    const Eigen::VectorXd res = cfg.loo_mode == LooMode::ClosedForm ? loo_residuals_closed_form(*model)
                                                                    : loo_residuals_refit(local, ylocal, basis, fc);
    region.cv_error = summarize_errors(res, cfg.error_measure);
    region.model = std::move(model);
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// Adaptive partitioning emulator. Starts from an n0-point LHD on [0,1]^d
/// and, while the design is smaller than N, takes the region with the
/// largest cross-validated error, tops it up to 2 n0 points with an LHD in
/// that region, splits it at the midpoint of the dimension picked by
/// choose_split_dimension, and fits a GP to each half.
inline ApeResult run_ape(const TargetFunction& f, const ApeConfig& cfg, const ApeObserver& observer = {}) {
    const auto d = static_cast<Eigen::Index>(f.dim);
    if (d < 1) throw InvalidArgument("run_ape: target has no inputs");
    cfg.validate(d);

    ApeResult res;
    Rng design_rng(derive_seed(cfg.seed, "ape-design"));
    std::uint64_t fit_counter = 0;
    auto next_fit_seed = [&] { return derive_seed(cfg.seed, "ape-fit", fit_counter++); };

    double eval_s = 0.0;
    auto append = [&](const Eigen::MatrixXd& pts, int iteration) {
        const auto t0 = detail::Clock::now();
        const Eigen::Index n_old = res.points.rows();
        Eigen::VectorXd vals(pts.rows());
        Eigen::VectorXd x(d);
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            x = pts.row(i).transpose();
            double v = 0.0;
            try {
                v = f(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
            } catch (const std::exception& e) {
                throw ApeAborted(std::string("target evaluation failed: ") + e.what(), res);
            }
            if (!std::isfinite(v)) throw ApeAborted("target returned a non-finite value", res);
            vals[i] = v;
        }
        res.points.conservativeResize(n_old + pts.rows(), d);
        res.points.bottomRows(pts.rows()) = pts;
        res.responses.conservativeResize(n_old + pts.rows());
        res.responses.tail(pts.rows()) = vals;
        res.added_at.insert(res.added_at.end(), static_cast<std::size_t>(pts.rows()), iteration);
        eval_s += detail::seconds_since(t0);
    };

    const auto t_init = detail::Clock::now();
    res.points.resize(0, d);
    append(lhd(cfg.n0, d, design_rng).points, 0);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(cfg.n0));
    for (Eigen::Index i = 0; i < cfg.n0; ++i) all[static_cast<std::size_t>(i)] = i;
    res.partition = Partition::whole(d, std::move(all));
    detail::fit_region(res.partition.regions[0], res.points, res.responses, cfg, next_fit_seed());
    res.initial_s = detail::seconds_since(t_init);
    res.initial_eval_s = eval_s;
    if (observer && !observer(res)) return res;

    int iteration = 0;
    while (res.size() < cfg.max_size) {
        const auto t_iter = detail::Clock::now();
        eval_s = 0.0;

        Eigen::Index k = -1;
        for (std::size_t r = 0; r < res.partition.regions.size(); ++r) {
            const Region& reg = res.partition.regions[r];
            if (!reg.splittable) continue;
            if (k < 0 || *reg.cv_error > *res.partition.regions[static_cast<std::size_t>(k)].cv_error)
                k = static_cast<Eigen::Index>(r);
        }
        if (k < 0) {
            res.exhausted = true;
            break;
        }

        Region& target = res.partition.regions[static_cast<std::size_t>(k)];
        const auto n_star = static_cast<Eigen::Index>(target.points.size());
        const Eigen::Index add = std::max<Eigen::Index>(0, 2 * cfg.n0 - n_star);
        if (add > 0) {
            const Eigen::Index first = res.size();
            append(lhd_in_box(add, target.box, design_rng).points, iteration + 1);
            for (Eigen::Index i = first; i < res.size(); ++i) target.points.push_back(i);
        }

        Eigen::Index j = 0;
        try {
            j = choose_split_dimension(target.box, target.points, res.points, res.responses, cfg.min_side(d));
        } catch (const NoValidSplit&) {
            if (add > 0) detail::fit_region(target, res.points, res.responses, cfg, next_fit_seed());
            target.splittable = false;
            continue;
        }

        ++iteration;
        res.partition = split_region(std::move(res.partition), k, j, res.points, iteration);
        Region& lower = res.partition.regions[static_cast<std::size_t>(k)];
        Region& upper = res.partition.regions.back();
        const std::uint64_t seed_lower = next_fit_seed();
        const std::uint64_t seed_upper = next_fit_seed();
        auto upper_fit = std::async(std::launch::async, [&] {
            detail::fit_region(upper, res.points, res.responses, cfg, seed_upper);
        });
        detail::fit_region(lower, res.points, res.responses, cfg, seed_lower);
        upper_fit.get();

        TraceRecord tr;
        tr.iter = iteration;
        tr.n = res.size();
        tr.K = res.partition.size();
        tr.region_id = k;
        tr.dim = j;
        tr.split_value = res.partition.split_log.back().value;
        tr.added = add;
        tr.child_errors = {*lower.cv_error, *upper.cv_error};
        for (const auto& r : res.partition.regions) tr.errors.push_back(*r.cv_error);
        tr.eval_s = eval_s;
        tr.elapsed_s = detail::seconds_since(t_iter);
        res.trace.push_back(std::move(tr));

        if (observer && !observer(res)) break;
    }
    return res;
}

}  // namespace apegp
