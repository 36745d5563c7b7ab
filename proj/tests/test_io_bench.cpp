#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "apegp/bench.hpp"

using namespace apegp;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("apegp_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    fs::path dir;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream is(p);
    std::size_t n = 0;
    for (std::string line; std::getline(is, line);) ++n;
    return n;
}

}  // namespace

using IoTest = TempDir;
using BenchTest = TempDir;

// ---- io --------------------------------------------------------------------

TEST_F(IoTest, DesignRoundTripsExactly) {
    Design des = lhd(17, 3, std::uint64_t{5});
    io::write_design(dir / "d.csv", des);
    const Design back = io::read_design(dir / "d.csv");
    EXPECT_TRUE(back.points == des.points);
    EXPECT_EQ(back.seed, 5u);
    EXPECT_EQ(back.provenance.kind, Provenance::Kind::LHD);

    const Design sg = sparse_grid(2, 4);
    io::write_design(dir / "s.csv", sg);
    const Design sback = io::read_design(dir / "s.csv");
    EXPECT_EQ(sback.provenance.kind, Provenance::Kind::SparseGrid);
    EXPECT_EQ(sback.provenance.eta, 4);
}

TEST_F(IoTest, TabulatedRoundTrip) {
    Eigen::MatrixXd X(3, 2);
    X << 0.1, 0.2, 1.0 / 3.0, 0.5, 0.9, 0.0;
    const Eigen::Vector3d y(1e-300, -2.5, std::exp(1.0));
    io::write_tabulated(dir / "t.csv", X, y);
    const auto [X2, y2] = io::read_tabulated(dir / "t.csv");
    EXPECT_TRUE(X2 == X);
    EXPECT_TRUE(y2 == y);
}

TEST_F(IoTest, MalformedRecordNamesLine) {
    {
        std::ofstream os(dir / "bad.csv");
        os << io::kRecordHeader << "\n";
        os << "StandardGP,franke-4d,129,0.2,0.5,0.01,1\n";
        os << "StandardGP,franke-4d,321,abc,0.5,0.01,1\n";
    }
    try {
        (void)io::read_records(dir / "bad.csv");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("bad.csv"), std::string::npos);
    }
    {
        std::ofstream os(dir / "short.csv");
        os << io::kRecordHeader << "\nAPE.100,f,300\n";
    }
    EXPECT_THROW((void)io::read_records(dir / "short.csv"), ParseError);
    {
        std::ofstream os(dir / "nohdr.csv");
        os << "a,b,c\n";
    }
    EXPECT_THROW((void)io::read_records(dir / "nohdr.csv"), ParseError);
}

TEST_F(IoTest, DesignHeaderIsChecked) {
    {
        std::ofstream os(dir / "d.csv");
        os << "a,b\n0.1,0.2\n";
    }
    EXPECT_THROW((void)io::read_design(dir / "d.csv"), ParseError);
    {
        std::ofstream os(dir / "e.csv");
        os << "x1,x2\n0.1,oops\n";
    }
    EXPECT_THROW((void)io::read_design(dir / "e.csv"), ParseError);
}

TEST(Io, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(std::stod(io::format_double(v)), v);
}

// ---- design subcommand ---------------------------------------------------------

TEST_F(BenchTest, DesignSgdSize) {
    bench::DesignOptions o{"sgd", 0, 4, 6, 1, dir / "sgd.csv"};
    const fs::path p = bench::cmd_design(o);
    EXPECT_EQ(count_lines(p), 42u);
    EXPECT_TRUE(fs::exists(dir / "sgd.json"));
}

TEST_F(BenchTest, DesignLhdIsByteIdentical) {
    bench::DesignOptions o{"lhd", 100, 10, 0, 7, dir / "a.csv"};
    bench::cmd_design(o);
    o.out = dir / "b.csv";
    bench::cmd_design(o);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_EQ(count_lines(dir / "a.csv"), 101u);
}

TEST_F(BenchTest, DesignUsageErrors) {
    EXPECT_THROW(bench::cmd_design({"lhd", 0, 3, 0, 1, dir / "x.csv"}), InvalidArgument);
    EXPECT_THROW(bench::cmd_design({"sgd", 0, 4, 3, 1, dir / "x.csv"}), InvalidArgument);
    EXPECT_THROW(bench::cmd_design({"grid", 5, 2, 0, 1, dir / "x.csv"}), InvalidArgument);
}

TEST_F(BenchTest, SeedStreamsAreIndependent) {
    const Design a = bench::lhd_for(50, 4, 1);
    const Design b = bench::lhd_for(51, 4, 1);
    const Design c = bench::lhd_for(50, 4, 1);
    EXPECT_TRUE(a.points == c.points);
    EXPECT_FALSE(a.points.topRows(50) == b.points.topRows(50));
    const TargetFunction f = make_target("franke-4d");
    EXPECT_TRUE(bench::test_set_for(f, 100, 1).points == bench::test_set_for(f, 100, 1).points);
}

// ---- fit subcommand ------------------------------------------------------------

TEST_F(BenchTest, FitWritesPredictionsAndRecord) {
    bench::FitOptions o;
    o.function = "franke-2d";
    o.n = 30;
    o.n_test = 500;
    o.seed = 3;
    o.out = dir;
    const auto out = bench::cmd_fit(o);
    EXPECT_EQ(out.record.method, "StandardGP");
    EXPECT_EQ(out.record.function, "franke-2d");
    EXPECT_EQ(out.record.n, 30);
    EXPECT_GT(out.record.rmspe_scaled, 0.0);
    EXPECT_LT(out.record.rmspe_scaled, 1.0);
    EXPECT_GT(out.record.mape_scaled, 0.0);
    EXPECT_EQ(count_lines(out.predictions), 501u);
    const auto recs = io::read_records(out.records);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].rmspe_scaled, out.record.rmspe_scaled);
}

TEST_F(BenchTest, FitIsDeterministicExceptTiming) {
    bench::FitOptions o;
    o.function = "franke-2d";
    o.n = 25;
    o.n_test = 300;
    o.seed = 11;
    o.out = dir;
    const auto a = bench::cmd_fit(o);
    const auto b = bench::cmd_fit(o);
    EXPECT_EQ(a.record.rmspe_scaled, b.record.rmspe_scaled);
    EXPECT_EQ(a.record.mape_scaled, b.record.mape_scaled);
    EXPECT_EQ(io::read_records(dir / "records.csv").size(), 2u);
}

TEST_F(BenchTest, FitSharesDesignFileAcrossMethods) {
    bench::cmd_design({"lhd", 40, 2, 0, 9, dir / "shared.csv"});
    bench::FitOptions o;
    o.function = "franke-2d";
    o.design = dir / "shared.csv";
    o.n_test = 200;
    o.out = dir;
    const auto a = bench::cmd_fit(o);
    EXPECT_EQ(a.record.n, 40);
    o.method = bench::Method::SGDFit;
    EXPECT_THROW(bench::cmd_fit(o), InvalidArgument);  // not a sparse grid
    o.design.clear();
    o.eta = 4;
    const auto s = bench::cmd_fit(o);
    EXPECT_EQ(s.record.method, "SGDFit");
    EXPECT_EQ(s.record.n, sparse_grid(2, 4).size());
}

TEST_F(BenchTest, FitConstantTabulatedDataIsDegenerate) {
    Eigen::MatrixXd X(6, 2), T(10, 2);
    for (Eigen::Index i = 0; i < 6; ++i) X.row(i) << 0.1 * i + 0.05, 0.9 - 0.13 * i;
    for (Eigen::Index i = 0; i < 10; ++i) T.row(i) << 0.07 * i + 0.01, 0.5;
    io::write_tabulated(dir / "train.csv", X, Eigen::VectorXd::Constant(6, 2.0));
    io::write_tabulated(dir / "test.csv", T, Eigen::VectorXd::Constant(10, 2.0));
    bench::FitOptions o;
    o.data = dir / "train.csv";
    o.test_data = dir / "test.csv";
    o.out = dir;
    EXPECT_THROW(bench::cmd_fit(o), DegenerateTestSet);
}

TEST_F(BenchTest, NumericFailureCarriesMethodAndSize) {
    Eigen::MatrixXd X(4, 2);
    X << 0.3, 0.4, 0.3, 0.4, 0.8, 0.1, 0.5, 0.9;
    io::write_tabulated(dir / "train.csv", X, Eigen::Vector4d(1.0, 2.0, 0.5, -1.0));
    Eigen::MatrixXd T(3, 2);
    T << 0.1, 0.1, 0.5, 0.5, 0.9, 0.2;
    io::write_tabulated(dir / "test.csv", T, Eigen::Vector3d(1, 2, 3));
    bench::FitOptions o;
    o.data = dir / "train.csv";
    o.test_data = dir / "test.csv";
    o.fit.jitter = 0.0;  // duplicated rows cannot be factorized without jitter
    o.out = dir;
    try {
        (void)bench::cmd_fit(o);
        FAIL() << "expected IllConditionedMatrix";
    } catch (const IllConditionedMatrix& e) {
        EXPECT_EQ(std::string(e.what()).rfind("StandardGP n=4: ", 0), 0u) << e.what();
        EXPECT_EQ(e.jitter(), 0.0);
    }
}

TEST_F(BenchTest, UnknownFunctionIsUsageError) {
    bench::FitOptions o;
    o.function = "nope";
    o.n = 10;
    o.out = dir;
    EXPECT_THROW(bench::cmd_fit(o), InvalidArgument);
}

// ---- ape subcommand ------------------------------------------------------------

TEST_F(BenchTest, ApeCheckpointAtN0MatchesInitialFit) {
    bench::ApeOptions o;
    o.function = "franke-2d";
    o.n0 = 20;
    o.N = 20;
    o.checkpoints = {20};
    o.n_test = 400;
    o.seed = 4;
    o.fit.multistarts = 2;
    o.out = dir;
    const auto out = bench::cmd_ape(o);
    ASSERT_EQ(out.records.size(), 1u);
    EXPECT_EQ(out.records[0].n, 20);
    EXPECT_EQ(out.records[0].method, "APE.20");
    EXPECT_TRUE(out.missed.empty());

    // the same fit by hand
    ApeConfig cfg;
    cfg.n0 = 20;
    cfg.max_size = 20;
    cfg.seed = 4;
    cfg.fit.multistarts = 2;
    const TargetFunction f = make_target("franke-2d");
    const ApeResult r = run_ape(f, cfg);
    const TestSet ts = bench::test_set_for(f, 400, 4);
    EXPECT_EQ(out.records[0].rmspe_scaled, scaled_errors(ts.truth, predict_mean(*r.partition.regions[0].model, ts.points)).rmspe);
}

TEST_F(BenchTest, ApeWritesTraceAndPartition) {
    bench::ApeOptions o;
    o.function = "franke-2d";
    o.n0 = 15;
    o.N = 90;
    o.checkpoints = {30, 60, 5000};
    o.n_test = 300;
    o.fit.multistarts = 2;
    o.fit.max_evals = 120;
    o.out = dir;
    const auto out = bench::cmd_ape(o);
    EXPECT_EQ(count_lines(dir / "trace.jsonl"), out.result.trace.size());
    EXPECT_EQ(out.records.size(), 2u);
    EXPECT_EQ(out.missed, std::vector<Eigen::Index>({5000}));
    EXPECT_EQ(io::read_records(dir / "records.csv").size(), 2u);

    std::ifstream is(dir / "partition.json");
    const auto j = io::json::parse(is);
    EXPECT_EQ(j["regions"].size(), static_cast<std::size_t>(out.result.partition.size()));
    EXPECT_EQ(j["splits"].size(), out.result.trace.size());
    EXPECT_TRUE(j["regions"][0].contains("theta"));

    std::ifstream ts(dir / "trace.jsonl");
    std::string first;
    std::getline(ts, first);
    const auto t0 = io::json::parse(first);
    for (const char* key : {"iter", "n", "K", "region_id", "dim", "split_value", "child_errors", "elapsed_s"})
        EXPECT_TRUE(t0.contains(key)) << key;

    const Design des = io::read_design(dir / "design.csv");
    EXPECT_TRUE(des.points == out.result.points);
    EXPECT_EQ(des.provenance.kind, Provenance::Kind::APE);
}

// ---- report subcommand ---------------------------------------------------------

TEST_F(BenchTest, ReportMergesSortsAndIsIdempotent) {
    io::write_records(dir / "a.csv", {{"StandardGP", "franke-4d", 321, 0.15, 0.5, 0.2, 1},
                                      {"APE.100", "franke-4d", 300, 0.21, 0.4, 0.1, 1}});
    io::write_records(dir / "b.csv", {{"StandardGP", "franke-4d", 129, 0.27, 0.6, 0.01, 1}});
    bench::ReportOptions o{{dir / "a.csv", dir / "b.csv"}, dir / "report.csv", true};
    const auto recs = bench::cmd_report(o);
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0].method, "APE.100");
    EXPECT_EQ(recs[1].n, 129);
    EXPECT_EQ(recs[2].n, 321);

    std::ifstream is(dir / "report.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    EXPECT_EQ(header, std::string(io::kRecordHeader) + io::kRecordLogHeader);
    const auto cells = io::split_csv_line(row);
    ASSERT_EQ(cells.size(), 11u);
    EXPECT_DOUBLE_EQ(std::stod(cells[7]), std::log10(300.0));
    EXPECT_DOUBLE_EQ(std::stod(cells[8]), std::log10(0.21));
    EXPECT_DOUBLE_EQ(std::stod(cells[10]), std::log10(0.1));

    const std::string first = slurp(dir / "report.csv");
    bench::ReportOptions again{{dir / "report.csv"}, dir / "report2.csv", true};
    bench::cmd_report(again);
    EXPECT_EQ(slurp(dir / "report2.csv"), first);
}
