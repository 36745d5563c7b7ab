#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "apegp/errors.hpp"

namespace apegp {

struct NelderMeadOptions {
    int max_evals = 500;
    double ftol = 1e-8;        // relative spread of simplex values
    double xtol = 1e-4;        // simplex diameter (absolute, in search coordinates)
    double initial_step = 1.0;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int evals = 0;
    bool converged = false;
};

/// Minimizes f over the box [lo, hi] with the classic simplex moves
/// (reflect 1, expand 2, contract 1/2, shrink 1/2). Every trial point is
/// projected onto the box. f may return +inf for infeasible points.
template <class F>
NelderMeadResult nelder_mead_bounded(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi, const NelderMeadOptions& opts = {}) {
    const Eigen::Index d = x0.size();
    if (d == 0 || lo.size() != d || hi.size() != d)
        throw InvalidArgument("nelder_mead_bounded: dimension mismatch");
    if ((lo.array() > hi.array()).any()) throw InvalidArgument("nelder_mead_bounded: lo > hi");

    NelderMeadResult res;
    auto project = [&](Eigen::VectorXd x) -> Eigen::VectorXd { return x.cwiseMax(lo).cwiseMin(hi); };
    auto eval = [&](const Eigen::VectorXd& x) {
        ++res.evals;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    std::vector<Eigen::VectorXd> simplex(d + 1);
    std::vector<double> values(d + 1);
    simplex[0] = project(x0);
    values[0] = eval(simplex[0]);
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd v = simplex[0];
        v[j] += (v[j] + opts.initial_step <= hi[j]) ? opts.initial_step : -opts.initial_step;
        simplex[j + 1] = project(v);
        values[j + 1] = eval(simplex[j + 1]);
    }

    std::vector<std::size_t> order(d + 1);
    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[order.size() - 2];

        const double fb = values[best];
        const double fw = values[worst];
        if (fb == -std::numeric_limits<double>::infinity()) {
            res.converged = true;
            break;
        }
        double diameter = 0.0;
        for (const auto& v : simplex) diameter = std::max(diameter, (v - simplex[best]).lpNorm<Eigen::Infinity>());
        const bool fconv = std::isfinite(fw) && std::abs(fw - fb) <= opts.ftol * (std::abs(fb) + std::abs(fw)) + 1e-300;
        if ((fconv && diameter <= opts.xtol) || diameter <= 1e-3 * opts.xtol) {
            res.converged = true;
            break;
        }
        if (res.evals >= opts.max_evals) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < simplex.size(); ++i)
            if (i != worst) centroid += simplex[i];
        centroid /= static_cast<double>(d);

        const Eigen::VectorXd xr = project(centroid + (centroid - simplex[worst]));
        const double fr = eval(xr);
        if (fr < fb) {
            const Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - simplex[worst]));
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second_worst]) {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        // contraction: outside if the reflection improved on the worst point
        const bool outside = fr < fw;
        const Eigen::VectorXd xc = outside ? project(centroid + 0.5 * (xr - centroid))
                                           : project(centroid + 0.5 * (simplex[worst] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : fw)) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i == best) continue;
            simplex[i] = project(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
            values[i] = eval(simplex[i]);
        }
    }

    const auto it = std::min_element(values.begin(), values.end());
    res.x = simplex[static_cast<std::size_t>(it - values.begin())];
    res.value = *it;
    return res;
}

}  // namespace apegp
