#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apegp/ape.hpp"
#include "apegp/design.hpp"
#include "apegp/gp.hpp"
#include "apegp/io.hpp"
#include "apegp/metrics.hpp"
#include "apegp/rng.hpp"
#include "apegp/testfns.hpp"

// Benchmark harness behind the `apebench` CLI.
//
// Randomness: every consumer draws from derive_seed(master, stream, index):
//   "design"  index n   LHD of size n (shared by all LHD-based methods)
//   "testset" index 0   uniform test points (shared by all methods and sizes)
//   "fit"     index n   optimizer starts for the global fit at size n
// APE runs use the master seed directly as ApeConfig::seed.

namespace apegp::bench {

namespace fs = std::filesystem;

inline constexpr const char* kOutDirEnv = "APEBENCH_OUT_DIR";

inline fs::path default_out_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? fs::path(env) : fs::path(".");
}

enum class Method { StandardGP, SGDFit, APE };

inline std::string method_name(Method m, Eigen::Index n0 = 0) {
    switch (m) {
        case Method::StandardGP: return "StandardGP";
        case Method::SGDFit: return "SGDFit";
        case Method::APE: return "APE." + std::to_string(n0);
    }
    return "?";
}

inline Design lhd_for(Eigen::Index n, Eigen::Index d, std::uint64_t master_seed) {
    Design des = lhd(n, d, derive_seed(master_seed, "design", static_cast<std::uint64_t>(n)));
    des.seed = master_seed;
    return des;
}

inline TestSet test_set_for(const TargetFunction& f, Eigen::Index n_test, std::uint64_t master_seed) {
    return make_test_set(f, n_test, derive_seed(master_seed, "testset"));
}

// ---- design ----------------------------------------------------------------

struct DesignOptions {
    std::string kind;  // "lhd" or "sgd"
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    int eta = 0;
    std::uint64_t seed = 1;
    fs::path out;      // CSV path; empty picks a name under default_out_dir()
};

inline Design make_design(const DesignOptions& o) {
    if (o.kind == "lhd") {
        if (o.n < 1) throw InvalidArgument("design lhd: --n must be >= 1");
        if (o.d < 1) throw InvalidArgument("design lhd: --d must be >= 1");
        return lhd_for(o.n, o.d, o.seed);
    }
    if (o.kind == "sgd") {
        if (o.d < 1) throw InvalidArgument("design sgd: --d must be >= 1");
        if (o.eta < o.d) throw InvalidArgument("design sgd: --eta must be >= --d");
        return sparse_grid(static_cast<int>(o.d), o.eta);
    }
    throw InvalidArgument("design: unknown generator '" + o.kind + "' (expected lhd or sgd)");
}

inline fs::path cmd_design(const DesignOptions& o) {
    const Design des = make_design(o);
    fs::path out = o.out;
    if (out.empty()) {
        out = default_out_dir() /
              (o.kind == "lhd" ? "design_lhd_n" + std::to_string(o.n) + "_d" + std::to_string(o.d) + "_s" +
                                     std::to_string(o.seed) + ".csv"
                               : "design_sgd_d" + std::to_string(o.d) + "_eta" + std::to_string(o.eta) + ".csv");
    }
    io::write_design(out, des);
    return out;
}

// ---- fit -------------------------------------------------------------------

struct FitOptions {
    std::string function;         // registry name (ignored when `data` is set)
    fs::path data;                // tabulated training data x1..xd,y
    fs::path test_data;           // tabulated test data; required with `data`
    fs::path design;              // design CSV for registry functions
    Method method = Method::StandardGP;
    Eigen::Index n = 0;           // LHD size when no design file is given
    int eta = 0;                  // sparse-grid level when no design file is given
    Eigen::Index n_test = 10000;
    std::uint64_t seed = 1;
    FitConfig fit;
    fs::path out;                 // output directory; empty means default_out_dir()
};

struct FitOutcome {
    BenchRecord record;
    fs::path predictions;
    fs::path records;
};

namespace detail {

template <class E>
[[noreturn]] void rethrow_with(const std::string& ctx, const E& e) {
    if constexpr (std::is_same_v<E, IllConditionedMatrix>)
        throw IllConditionedMatrix(ctx + e.what(), e.jitter());
    else
        throw E(ctx + e.what());
}

inline Eigen::VectorXd evaluate(const TargetFunction& f, const Eigen::MatrixXd& pts) {
    if (pts.cols() != static_cast<Eigen::Index>(f.dim))
        throw InvalidArgument(f.name + ": design has " + std::to_string(pts.cols()) + " columns, expected " +
                              std::to_string(f.dim));
    Eigen::VectorXd y(pts.rows());
    Eigen::VectorXd x(pts.cols());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        x = pts.row(i).transpose();
        y[i] = f(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }
    return y;
}

inline double minutes_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::ratio<60>>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Fits one global GP, predicts the test set, writes per-point predictions
/// and appends a BenchRecord to <out>/records.csv.
inline FitOutcome cmd_fit(const FitOptions& o) {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::MatrixXd test_pts;
    Eigen::VectorXd truth;
    std::string fname;

    if (!o.data.empty()) {
        if (o.test_data.empty()) throw InvalidArgument("fit: --test-data is required with --data");
        std::tie(X, y) = io::read_tabulated(o.data);
        std::tie(test_pts, truth) = io::read_tabulated(o.test_data);
        if (test_pts.cols() != X.cols()) throw InvalidArgument("fit: training and test data dimensions differ");
        fname = o.data.stem().string();
    } else {
        const TargetFunction f = make_target(o.function);
        const auto d = static_cast<Eigen::Index>(f.dim);
        fname = f.name;
        Design des;
        if (!o.design.empty()) {
            des = io::read_design(o.design);
        } else if (o.method == Method::SGDFit) {
            if (o.eta < d) throw InvalidArgument("fit: SGDFit needs --eta >= d or a sparse-grid --design");
            des = sparse_grid(static_cast<int>(d), o.eta);
        } else {
            if (o.n < 1) throw InvalidArgument("fit: give --n or --design");
            des = lhd_for(o.n, d, o.seed);
        }
        if (o.method == Method::SGDFit && des.provenance.kind != Provenance::Kind::SparseGrid)
            throw InvalidArgument("fit: SGDFit requires a sparse-grid design");
        X = des.points;
        y = detail::evaluate(f, X);
        if (!o.test_data.empty()) {
            std::tie(test_pts, truth) = io::read_tabulated(o.test_data);
        } else {
            TestSet ts = test_set_for(f, o.n_test, o.seed);
            test_pts = std::move(ts.points);
            truth = std::move(ts.truth);
        }
    }

    const Eigen::Index n = X.rows();
    const std::string mname = method_name(o.method);
    const std::string ctx = mname + " n=" + std::to_string(n) + ": ";
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            if (!(X(i, j) >= 0.0 && X(i, j) <= 1.0)) throw InvalidArgument(ctx + "design point outside [0,1]^d");

    FitConfig fc = o.fit;
    fc.seed = derive_seed(o.seed, "fit", static_cast<std::uint64_t>(n));
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<TrainedGP> model;
    try {
        model.emplace(fit(X, y, TrendBasis::constant(X.cols()), fc));
    } catch (const IllConditionedMatrix& e) {
        detail::rethrow_with(ctx, e);
    } catch (const InsufficientData& e) {
        detail::rethrow_with(ctx, e);
    } catch (const DegenerateTrend& e) {
        detail::rethrow_with(ctx, e);
    }
    Eigen::VectorXd mean(test_pts.rows());
    Eigen::VectorXd se(test_pts.rows());
    for (Eigen::Index i = 0; i < test_pts.rows(); ++i) {
        const Prediction p = predict(*model, test_pts.row(i).transpose());
        mean[i] = p.mean;
        se[i] = p.se;
    }
    const double minutes = detail::minutes_since(t0);

    const ScaledMetrics sm = scaled_errors(truth, mean);
    FitOutcome out;
    out.record = {mname, fname, static_cast<long long>(n), sm.rmspe, sm.mape, minutes, o.seed};

    const fs::path dir = o.out.empty() ? default_out_dir() : o.out;
    out.predictions = dir / ("predictions_" + mname + "_" + fname + "_n" + std::to_string(n) + ".csv");
    {
        auto os = io::detail::open_out(out.predictions);
        for (Eigen::Index j = 0; j < test_pts.cols(); ++j) os << 'x' << (j + 1) << ',';
        os << "truth,mean,se\n";
        for (Eigen::Index i = 0; i < test_pts.rows(); ++i) {
            for (Eigen::Index j = 0; j < test_pts.cols(); ++j) os << io::format_double(test_pts(i, j)) << ',';
            os << io::format_double(truth[i]) << ',' << io::format_double(mean[i]) << ',' << io::format_double(se[i])
               << '\n';
        }
    }
    out.records = dir / "records.csv";
    io::append_record(out.records, out.record);
    return out;
}

// ---- ape -------------------------------------------------------------------

struct ApeOptions {
    std::string function;
    Eigen::Index n0 = 100;
    Eigen::Index N = 1000;
    std::vector<Eigen::Index> checkpoints;  // empty: one record at the end
    std::uint64_t seed = 1;
    Eigen::Index n_test = 10000;
    LooMode loo_mode = LooMode::ClosedForm;
    ErrorMeasure error_measure = ErrorMeasure::MSE;
    FitConfig fit;
    fs::path out;
};

struct ApeOutcome {
    ApeResult result;
    std::vector<BenchRecord> records;
    std::vector<Eigen::Index> missed;  // checkpoints the run never reached
    fs::path dir;
};

/// Scores the current partitioned predictor on a test set.
inline BenchRecord score_partition(const ApeResult& state, const TestSet& ts, const std::string& method,
                                   const std::string& function, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::VectorXd pred = predict_partitioned_mean(state.partition, ts.points);
    const double minutes = state.algorithm_seconds() / 60.0 + detail::minutes_since(t0);
    const ScaledMetrics sm = scaled_errors(ts.truth, pred);
    return {method, function, static_cast<long long>(state.size()), sm.rmspe, sm.mape, minutes, seed};
}

/// Runs APE, scoring the partitioned predictor each time the design size
/// first reaches a checkpoint. Writes trace.jsonl, partition.json, the
/// final design (design.csv + design.json), data.csv and records.csv.
inline ApeOutcome cmd_ape(const ApeOptions& o) {
    const TargetFunction f = make_target(o.function);
    std::vector<Eigen::Index> cps = o.checkpoints;
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    for (Eigen::Index c : cps)
        if (c < 1) throw InvalidArgument("ape: checkpoints must be positive");

    ApeConfig cfg;
    cfg.n0 = o.n0;
    cfg.max_size = o.N;
    cfg.seed = o.seed;
    cfg.fit = o.fit;
    cfg.loo_mode = o.loo_mode;
    cfg.error_measure = o.error_measure;

    const TestSet ts = test_set_for(f, o.n_test, o.seed);
    const std::string mname = method_name(Method::APE, o.n0);

    ApeOutcome out;
    std::size_t next = 0;
    auto observer = [&](const ApeResult& state) {
        if (next < cps.size() && state.size() >= cps[next]) {
            out.records.push_back(score_partition(state, ts, mname, f.name, o.seed));
            while (next < cps.size() && state.size() >= cps[next]) ++next;
        }
        return true;
    };
    out.result = run_ape(f, cfg, observer);
    if (cps.empty()) out.records.push_back(score_partition(out.result, ts, mname, f.name, o.seed));
    out.missed.assign(cps.begin() + static_cast<std::ptrdiff_t>(next), cps.end());

    out.dir = o.out.empty() ? default_out_dir() : o.out;
    io::write_trace(out.dir / "trace.jsonl", out.result.trace);
    io::write_partition(out.dir / "partition.json", out.result.partition);
    io::write_design(out.dir / "design.csv", out.result.design(o.seed));
    io::write_tabulated(out.dir / "data.csv", out.result.points, out.result.responses);
    for (const auto& r : out.records) io::append_record(out.dir / "records.csv", r);
    return out;
}

// ---- report ----------------------------------------------------------------

struct ReportOptions {
    std::vector<fs::path> inputs;
    fs::path out;
    bool log_columns = false;
};

/// Merges record files, sorts by (method, function, n) keeping input order
/// for ties, and writes a tidy CSV, optionally with log10 columns.
inline std::vector<BenchRecord> cmd_report(const ReportOptions& o) {
    if (o.inputs.empty()) throw InvalidArgument("report: no input files");
    std::vector<BenchRecord> all;
    for (const auto& p : o.inputs) {
        auto recs = io::read_records(p);
        all.insert(all.end(), recs.begin(), recs.end());
    }
    std::stable_sort(all.begin(), all.end(), [](const BenchRecord& a, const BenchRecord& b) {
        return std::tie(a.method, a.function, a.n) < std::tie(b.method, b.function, b.n);
    });
    io::write_records(o.out.empty() ? default_out_dir() / "report.csv" : o.out, all, o.log_columns);
    return all;
}

}  // namespace apegp::bench
