#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "apegp/ape.hpp"
#include "apegp/design.hpp"
#include "apegp/errors.hpp"
#include "apegp/metrics.hpp"

namespace apegp::io {

using json = nlohmann::json;

/// Shortest-roundtrip-safe text for a double (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& source, std::size_t line) {
    if (s.empty()) throw ParseError(source, line, "empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw ParseError(source, line, "not a number: '" + s + "'");
    return v;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::trunc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::out | mode);
    if (!os) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
    return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open '" + path.string() + "'");
    return is;
}

// Reads a numeric CSV with a header row; returns (header, rows).
inline std::pair<std::vector<std::string>, Eigen::MatrixXd> read_numeric_csv(const std::filesystem::path& path) {
    auto is = open_in(path);
    const std::string src = path.string();
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        header = split_csv_line(line);
        break;
    }
    if (header.empty()) throw ParseError(src, lineno, "missing header");
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError(src, lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                              std::to_string(cells.size()));
        std::vector<double> r;
        r.reserve(cells.size());
        for (const auto& c : cells) r.push_back(parse_double(c, src, lineno));
        rows.push_back(std::move(r));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < header.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return {header, m};
}

}  // namespace detail

// ---- designs ---------------------------------------------------------------

inline void write_points_csv(std::ostream& os, const Eigen::MatrixXd& pts) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) os << (j ? "," : "") << 'x' << (j + 1);
    os << '\n';
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        for (Eigen::Index j = 0; j < pts.cols(); ++j) os << (j ? "," : "") << format_double(pts(i, j));
        os << '\n';
    }
}

inline json design_sidecar(const Design& design) {
    json j;
    j["provenance"] = to_string(design.provenance.kind);
    if (design.provenance.kind == Provenance::Kind::SparseGrid) j["eta"] = design.provenance.eta;
    if (design.provenance.kind == Provenance::Kind::APE) j["iteration"] = design.provenance.iteration;
    j["seed"] = design.seed;
    j["n"] = design.size();
    j["d"] = design.dim();
    return j;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

/// Writes `<path>` (header x1..xd, one row per point) and the JSON sidecar
/// next to it with the extension replaced by .json.
inline void write_design(const std::filesystem::path& path, const Design& design) {
    {
        auto os = detail::open_out(path);
        write_points_csv(os, design.points);
    }
    auto js = detail::open_out(sidecar_path(path));
    js << design_sidecar(design).dump(2) << '\n';
}

inline Design read_design(const std::filesystem::path& path) {
    auto [header, m] = detail::read_numeric_csv(path);
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] != "x" + std::to_string(j + 1))
            throw ParseError(path.string(), 1, "design header must be x1,...,xd");
    Design d;
    d.points = std::move(m);
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream is(side);
        const json j = json::parse(is);
        const std::string kind = j.value("provenance", "LHD");
        d.provenance.kind = kind == "SparseGrid" ? Provenance::Kind::SparseGrid
                            : kind == "APE"      ? Provenance::Kind::APE
                                                 : Provenance::Kind::LHD;
        d.provenance.eta = j.value("eta", 0);
        d.provenance.iteration = j.value("iteration", 0);
        d.seed = j.value("seed", std::uint64_t{0});
    }
    return d;
}

/// Tabulated target: header x1..xd,y. Returns (points, responses).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> read_tabulated(const std::filesystem::path& path) {
    auto [header, m] = detail::read_numeric_csv(path);
    if (header.size() < 2 || header.back() != "y")
        throw ParseError(path.string(), 1, "tabulated data header must be x1,...,xd,y");
    return {m.leftCols(m.cols() - 1), m.col(m.cols() - 1)};
}

inline void write_tabulated(const std::filesystem::path& path, const Eigen::MatrixXd& pts, const Eigen::VectorXd& y) {
    auto os = detail::open_out(path);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) os << 'x' << (j + 1) << ',';
    os << "y\n";
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        for (Eigen::Index j = 0; j < pts.cols(); ++j) os << format_double(pts(i, j)) << ',';
        os << format_double(y[i]) << '\n';
    }
}

// ---- benchmark records -----------------------------------------------------

inline constexpr const char* kRecordHeader = "method,function,n,rmspe_scaled,mape_scaled,time_minutes,seed";
inline constexpr const char* kRecordLogHeader = ",log10_n,log10_rmspe_scaled,log10_mape_scaled,log10_time_minutes";

inline std::string record_row(const BenchRecord& r, bool with_log = false) {
    std::string s = r.method + "," + r.function + "," + std::to_string(r.n) + "," + format_double(r.rmspe_scaled) +
                    "," + format_double(r.mape_scaled) + "," + format_double(r.time_minutes) + "," +
                    std::to_string(r.seed);
    if (with_log) {
        s += "," + format_double(std::log10(static_cast<double>(r.n))) + "," + format_double(std::log10(r.rmspe_scaled)) +
             "," + format_double(std::log10(r.mape_scaled)) + "," + format_double(std::log10(r.time_minutes));
    }
    return s;
}

inline void write_records(const std::filesystem::path& path, const std::vector<BenchRecord>& recs, bool with_log = false) {
    auto os = detail::open_out(path);
    os << kRecordHeader << (with_log ? kRecordLogHeader : "") << '\n';
    for (const auto& r : recs) os << record_row(r, with_log) << '\n';
}

/// Appends one row, writing the header first if the file is new or empty.
inline void append_record(const std::filesystem::path& path, const BenchRecord& r) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    auto os = detail::open_out(path, std::ios::app);
    if (fresh) os << kRecordHeader << '\n';
    os << record_row(r) << '\n';
}

/// Reads a record CSV. Extra trailing columns (e.g. log10 columns) are ignored.
inline std::vector<BenchRecord> read_records(const std::filesystem::path& path) {
    auto is = detail::open_in(path);
    const std::string src = path.string();
    std::string line;
    std::size_t lineno = 0;
    std::vector<BenchRecord> out;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        if (!header_seen) {
            const auto expected = split_csv_line(kRecordHeader);
            if (cells.size() < expected.size() || !std::equal(expected.begin(), expected.end(), cells.begin()))
                throw ParseError(src, lineno, "expected header '" + std::string(kRecordHeader) + "'");
            header_seen = true;
            continue;
        }
        if (cells.size() < 7) throw ParseError(src, lineno, "expected at least 7 fields");
        BenchRecord r;
        r.method = cells[0];
        r.function = cells[1];
        const double n = parse_double(cells[2], src, lineno);
        if (n < 0 || n != std::floor(n)) throw ParseError(src, lineno, "n must be a nonnegative integer");
        r.n = static_cast<long long>(n);
        r.rmspe_scaled = parse_double(cells[3], src, lineno);
        r.mape_scaled = parse_double(cells[4], src, lineno);
        r.time_minutes = parse_double(cells[5], src, lineno);
        char* end = nullptr;
        r.seed = std::strtoull(cells[6].c_str(), &end, 10);
        if (cells[6].empty() || end != cells[6].c_str() + cells[6].size())
            throw ParseError(src, lineno, "seed must be an unsigned integer");
        out.push_back(std::move(r));
    }
    if (!header_seen) throw ParseError(src, lineno, "missing header");
    return out;
}

// ---- APE trace and partition -----------------------------------------------

inline json trace_to_json(const TraceRecord& t) {
    return json{{"iter", t.iter},
                {"n", t.n},
                {"K", t.K},
                {"region_id", t.region_id},
                {"dim", t.dim},
                {"split_value", t.split_value},
                {"added", t.added},
                {"child_errors", {t.child_errors[0], t.child_errors[1]}},
                {"errors", t.errors},
                {"elapsed_s", t.elapsed_s},
                {"eval_s", t.eval_s}};
}

/// JSON lines, one object per iteration.
inline void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& trace) {
    auto os = detail::open_out(path);
    for (const auto& t : trace) os << trace_to_json(t).dump() << '\n';
}

inline json partition_to_json(const Partition& p) {
    json regions = json::array();
    for (std::size_t k = 0; k < p.regions.size(); ++k) {
        const Region& r = p.regions[k];
        json jr;
        jr["id"] = k;
        jr["lo"] = std::vector<double>(r.box.lo.data(), r.box.lo.data() + r.box.lo.size());
        jr["hi"] = std::vector<double>(r.box.hi.data(), r.box.hi.data() + r.box.hi.size());
        jr["points"] = r.points;
        jr["cv_error"] = r.cv_error ? json(*r.cv_error) : json(nullptr);
        if (r.model) {
            const auto& th = r.model->params().theta();
            const auto& b = r.model->beta();
            jr["theta"] = std::vector<double>(th.data(), th.data() + th.size());
            jr["beta"] = std::vector<double>(b.data(), b.data() + b.size());
            jr["sigma2"] = r.model->sigma2();
            jr["jitter"] = r.model->jitter();
        }
        regions.push_back(std::move(jr));
    }
    json splits = json::array();
    for (const auto& s : p.split_log)
        splits.push_back({{"iteration", s.iteration}, {"region", s.region}, {"dim", s.dim}, {"value", s.value}});
    return json{{"regions", regions}, {"splits", splits}};
}

inline void write_partition(const std::filesystem::path& path, const Partition& p) {
    auto os = detail::open_out(path);
    os << partition_to_json(p).dump(2) << '\n';
}

}  // namespace apegp::io
