#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apegp/errors.hpp"

namespace apegp {

/// Corner-peak coefficients for d = 10, sorted largest first; they sum to 1.85.
inline constexpr std::array<double, 10> kCornerPeakA10 = {0.4761, 0.4500, 0.3297, 0.2553, 0.0963,
                                                          0.0764, 0.0714, 0.0648, 0.0286, 0.0014};

namespace detail {

inline void check_unit_cube(std::span<const double> x, const char* who) {
    for (double v : x)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(who) + ": input outside [0,1]");
}

}  // namespace detail

/// (1 + sum_j a_j x_j)^-(d+1)
inline double corner_peak(std::span<const double> x, std::span<const double> a) {
    if (x.size() != a.size() || x.empty()) throw InvalidArgument("corner_peak: dimension mismatch");
    detail::check_unit_cube(x, "corner_peak");
    double s = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!(a[j] > 0.0)) throw InvalidArgument("corner_peak: coefficients must be positive");
        s += a[j] * x[j];
    }
    return std::pow(s, -static_cast<double>(x.size() + 1));
}

/// Bivariate Franke function: two Gaussian peaks and a dip.
inline double franke2d(double x1, double x2) {
    const double a = 9.0 * x1;
    const double b = 9.0 * x2;
    return 0.75 * std::exp(-(a - 2.0) * (a - 2.0) / 4.0 - (b - 2.0) * (b - 2.0) / 4.0) +
           0.75 * std::exp(-(a + 1.0) * (a + 1.0) / 49.0 - (b + 1.0) * (b + 1.0) / 10.0) +
           0.5 * std::exp(-(a - 7.0) * (a - 7.0) / 4.0 - (b - 3.0) * (b - 3.0) / 4.0) -
           0.2 * std::exp(-(a - 4.0) * (a - 4.0) - (b - 7.0) * (b - 7.0));
}

inline double franke4d(std::span<const double> x) {
    if (x.size() != 4) throw InvalidArgument("franke4d: expects 4 inputs");
    return franke2d(x[0], x[1]) + franke2d(x[2], x[3]);
}

/// A named deterministic target on [0,1]^d.
struct TargetFunction {
    std::string name;
    std::size_t dim = 0;
    std::function<double(std::span<const double>)> eval;
    std::vector<std::pair<std::string, double>> params;

    double operator()(std::span<const double> x) const {
        if (x.size() != dim) throw InvalidArgument(name + ": expects " + std::to_string(dim) + " inputs");
        return eval(x);
    }
};

inline TargetFunction make_corner_peak(std::vector<double> a) {
    TargetFunction f;
    f.name = "corner-peak-" + std::to_string(a.size()) + "d";
    f.dim = a.size();
    for (std::size_t j = 0; j < a.size(); ++j) f.params.emplace_back("a" + std::to_string(j + 1), a[j]);
    f.eval = [a = std::move(a)](std::span<const double> x) { return corner_peak(x, a); };
    return f;
}

inline std::vector<std::string> registered_targets() { return {"corner-peak-10d", "franke-2d", "franke-4d"}; }

/// Looks up one of registered_targets() by name.
inline TargetFunction make_target(std::string_view name) {
    if (name == "corner-peak-10d")
        return make_corner_peak(std::vector<double>(kCornerPeakA10.begin(), kCornerPeakA10.end()));
    if (name == "franke-2d") {
        return {"franke-2d", 2,
                [](std::span<const double> x) {
                    detail::check_unit_cube(x, "franke2d");
                    return franke2d(x[0], x[1]);
                },
                {}};
    }
    if (name == "franke-4d") {
        return {"franke-4d", 4,
                [](std::span<const double> x) {
                    detail::check_unit_cube(x, "franke4d");
                    return franke4d(x);
                },
                {}};
    }
    throw InvalidArgument("unknown function '" + std::string(name) + "'");
}

}  // namespace apegp
