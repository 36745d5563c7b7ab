#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apegp/errors.hpp"
#include "apegp/kernel.hpp"
#include "apegp/rng.hpp"

namespace apegp {

/// Axis-aligned box inside [0,1]^d.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    static Box unit(Eigen::Index d) { return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)}; }

    [[nodiscard]] Eigen::Index dim() const noexcept { return lo.size(); }
    [[nodiscard]] Eigen::VectorXd width() const { return hi - lo; }
    [[nodiscard]] double volume() const { return width().prod(); }

    void validate() const {
        if (lo.size() == 0 || lo.size() != hi.size()) throw InvalidArgument("Box: dimension mismatch");
        for (Eigen::Index j = 0; j < lo.size(); ++j) {
            if (!(lo[j] < hi[j])) throw InvalidArgument("Box: degenerate extent in dimension " + std::to_string(j));
            if (lo[j] < 0.0 || hi[j] > 1.0) throw InvalidArgument("Box: extends outside [0,1]");
        }
    }

    /// Half-open membership [lo, hi), except that an upper edge on the
    /// domain boundary (hi == 1) is closed.
    template <class V>
    [[nodiscard]] bool contains(const Eigen::MatrixBase<V>& x) const {
        for (Eigen::Index j = 0; j < lo.size(); ++j) {
            if (x(j) < lo[j]) return false;
            if (x(j) >= hi[j] && !(hi[j] == 1.0 && x(j) == 1.0)) return false;
        }
        return true;
    }

    /// Affine map of a point in the box onto [0,1]^d.
    template <class V>
    [[nodiscard]] Eigen::VectorXd to_local(const Eigen::MatrixBase<V>& x) const {
        return ((x - lo).array() / (hi - lo).array()).matrix();
    }
};

struct Provenance {
    enum class Kind { LHD, SparseGrid, APE };
    Kind kind = Kind::LHD;
    int eta = 0;        // SparseGrid only
    int iteration = 0;  // APE only: iterations completed when the design was taken
};

inline std::string to_string(Provenance::Kind k) {
    switch (k) {
        case Provenance::Kind::LHD: return "LHD";
        case Provenance::Kind::SparseGrid: return "SparseGrid";
        case Provenance::Kind::APE: return "APE";
    }
    return "?";
}

/// Ordered list of points (rows) in [0,1]^d.
struct Design {
    Eigen::MatrixXd points;
    Provenance provenance;
    std::uint64_t seed = 0;  // 0 for deterministic generators

    [[nodiscard]] Eigen::Index size() const noexcept { return points.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return points.cols(); }
};

/// Random Latin hypercube: one point per stratum [(i-1)/n, i/n) in every
/// coordinate, uniformly placed within the stratum, strata permuted
/// independently per dimension. Coordinates are strictly inside (0,1).
inline Design lhd(Eigen::Index n, Eigen::Index d, Rng& rng) {
    if (n < 1) throw InvalidArgument("lhd: n must be >= 1");
    if (d < 1) throw InvalidArgument("lhd: d must be >= 1");
    Design out;
    out.points.resize(n, d);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto stratum = static_cast<double>(perm[static_cast<std::size_t>(i)]);
            const double upper = (stratum + 1.0) / static_cast<double>(n);
            const double v = (stratum + rng.uniform()) / static_cast<double>(n);
            out.points(i, j) = v < upper ? v : std::nextafter(upper, 0.0);
        }
    }
    out.provenance.kind = Provenance::Kind::LHD;
    return out;
}

inline Design lhd(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Design out = lhd(n, d, rng);
    out.seed = seed;
    return out;
}

/// lhd(n, d) mapped affinely onto `box`; every point lies strictly inside.
inline Design lhd_in_box(Eigen::Index n, const Box& box, Rng& rng) {
    box.validate();
    Design out = lhd(n, box.dim(), rng);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < box.dim(); ++j) {
            double v = box.lo[j] + (box.hi[j] - box.lo[j]) * out.points(i, j);
            if (v >= box.hi[j]) v = std::nextafter(box.hi[j], box.lo[j]);
            if (v <= box.lo[j]) v = std::nextafter(box.lo[j], box.hi[j]);
            out.points(i, j) = v;
        }
    }
    return out;
}

namespace detail {

// Base-2 radical inverse: 0, 1/2, 1/4, 3/4, 1/8, 5/8, ...
inline double van_der_corput(std::uint64_t i) {
    double v = 0.0;
    double f = 0.5;
    while (i) {
        if (i & 1U) v += f;
        i >>= 1U;
        f *= 0.5;
    }
    return v;
}

}  // namespace detail

/// Nested one-dimensional component design of size 2k - 1.
/// Level 1 is {1/2}; each later level adds the symmetric pair {p, 1 - p}
/// with p = 0, 1/4, 1/8, 3/8, 1/16, ... (half the van der Corput sequence).
/// All points are dyadic rationals, so nesting holds exactly.
inline std::vector<double> component_design(int level) {
    if (level < 1) throw InvalidArgument("component_design: level must be >= 1");
    std::vector<double> pts{0.5};
    for (int k = 2; k <= level; ++k) {
        const double p = 0.5 * detail::van_der_corput(static_cast<std::uint64_t>(k - 2));
        pts.push_back(p);
        pts.push_back(1.0 - p);
    }
    std::sort(pts.begin(), pts.end());
    return pts;
}

namespace detail {

inline std::vector<long long> canonical_key(const Eigen::VectorXd& x) {
    std::vector<long long> key(static_cast<std::size_t>(x.size()));
    for (Eigen::Index j = 0; j < x.size(); ++j) key[static_cast<std::size_t>(j)] = std::llround(x[j] * 1e12);
    return key;
}

// Calls visit(k) for every k in N^d with k_j >= 1 and sum k_j == total.
inline void for_each_composition(int d, int total, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> k(static_cast<std::size_t>(d), 1);
    std::function<void(int, int)> rec = [&](int j, int remaining) {
        if (j == d - 1) {
            k[static_cast<std::size_t>(j)] = remaining;
            visit(k);
            return;
        }
        const int rest = d - j - 1;  // each later part needs at least 1
        for (int v = 1; v <= remaining - rest; ++v) {
            k[static_cast<std::size_t>(j)] = v;
            rec(j + 1, remaining - v);
        }
    };
    rec(0, total);
}

}  // namespace detail

/// Sparse grid design: the union over all k with sum k_j = eta of the
/// tensor products of component designs, deduplicated after rounding to 12
/// decimals and sorted lexicographically.
inline Design sparse_grid(int d, int eta) {
    if (d < 1) throw InvalidArgument("sparse_grid: d must be >= 1");
    if (eta < d) throw InvalidArgument("sparse_grid: eta must be >= d");

    const int max_level = eta - d + 1;
    std::vector<std::vector<double>> comps(static_cast<std::size_t>(max_level + 1));
    for (int l = 1; l <= max_level; ++l) comps[static_cast<std::size_t>(l)] = component_design(l);

    std::map<std::vector<long long>, Eigen::VectorXd> unique;
    Eigen::VectorXd x(d);
    detail::for_each_composition(d, eta, [&](const std::vector<int>& k) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        while (true) {
            for (int j = 0; j < d; ++j)
                x[j] = comps[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])][idx[static_cast<std::size_t>(j)]];
            unique.emplace(detail::canonical_key(x), x);
            int j = d - 1;
            for (; j >= 0; --j) {
                auto& i = idx[static_cast<std::size_t>(j)];
                if (++i < comps[static_cast<std::size_t>(k[static_cast<std::size_t>(j)])].size()) break;
                i = 0;
            }
            if (j < 0) break;
        }
    });

    Design out;
    out.points.resize(static_cast<Eigen::Index>(unique.size()), d);
    Eigen::Index row = 0;
    for (const auto& [key, pt] : unique) out.points.row(row++) = pt.transpose();
    out.provenance = {Provenance::Kind::SparseGrid, eta, 0};
    return out;
}

/// Cartesian product of component sets; the first dimension varies slowest,
/// matching the index order of R_1 (x) R_2 (x) ... (x) R_d.
inline Eigen::MatrixXd full_grid(const std::vector<std::vector<double>>& components) {
    if (components.empty()) throw InvalidArgument("full_grid: no components");
    Eigen::Index total = 1;
    for (const auto& c : components) {
        if (c.empty()) throw InvalidArgument("full_grid: empty component");
        total *= static_cast<Eigen::Index>(c.size());
    }
    const auto d = static_cast<Eigen::Index>(components.size());
    Eigen::MatrixXd pts(total, d);
    for (Eigen::Index i = 0; i < total; ++i) {
        Eigen::Index rem = i;
        for (Eigen::Index j = d - 1; j >= 0; --j) {
            const auto& c = components[static_cast<std::size_t>(j)];
            const auto nj = static_cast<Eigen::Index>(c.size());
            pts(i, j) = c[static_cast<std::size_t>(rem % nj)];
            rem /= nj;
        }
    }
    return pts;
}

inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Checks that the correlation matrix of `grid` equals the Kronecker
/// product of the per-dimension correlation matrices (abs tol 1e-12) and
/// that the Kronecker product of their inverses inverts it (abs tol 1e-8).
/// The comparison is order-sensitive: `grid` must list the points with the
/// first dimension varying slowest. Throws if `grid` is not the Cartesian
/// product of `components`.
inline bool full_grid_kronecker_check(const std::vector<std::vector<double>>& components,
                                      const Eigen::MatrixXd& grid, const CorrelationParams& params) {
    const auto d = static_cast<Eigen::Index>(components.size());
    if (d == 0 || grid.cols() != d || params.dim() != d)
        throw InvalidArgument("full_grid_kronecker_check: dimension mismatch");
    Eigen::Index total = 1;
    for (const auto& c : components) total *= static_cast<Eigen::Index>(c.size());
    if (grid.rows() != total) throw InvalidArgument("full_grid_kronecker_check: point count is not a full grid");
    if (total > 200) throw InvalidArgument("full_grid_kronecker_check: grid larger than 200 points");

    std::set<std::vector<long long>> expected;
    const Eigen::MatrixXd canonical = full_grid(components);
    for (Eigen::Index i = 0; i < total; ++i) expected.insert(detail::canonical_key(canonical.row(i).transpose()));
    std::set<std::vector<long long>> seen;
    for (Eigen::Index i = 0; i < total; ++i) {
        auto key = detail::canonical_key(grid.row(i).transpose());
        if (!expected.count(key)) throw InvalidArgument("full_grid_kronecker_check: point not on the grid");
        seen.insert(std::move(key));
    }
    if (static_cast<Eigen::Index>(seen.size()) != total)
        throw InvalidArgument("full_grid_kronecker_check: duplicated grid point");

    Eigen::MatrixXd kron = Eigen::MatrixXd::Ones(1, 1);
    Eigen::MatrixXd kron_inv = Eigen::MatrixXd::Ones(1, 1);
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto& c = components[static_cast<std::size_t>(j)];
        Eigen::MatrixXd pts = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        const Eigen::MatrixXd Rj = correlation_matrix(pts, CorrelationParams::constant(1, params[j]));
        kron = kronecker(kron, Rj);
        kron_inv = kronecker(kron_inv, Rj.inverse());
    }
    const Eigen::MatrixXd R = correlation_matrix(grid, params);
    if ((R - kron).cwiseAbs().maxCoeff() > 1e-12) return false;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(total, total);
    return (kron_inv * R - I).cwiseAbs().maxCoeff() <= 1e-8;
}

inline bool full_grid_kronecker_check(const std::vector<std::vector<double>>& components,
                                      const CorrelationParams& params) {
    return full_grid_kronecker_check(components, full_grid(components), params);
}

}  // namespace apegp
