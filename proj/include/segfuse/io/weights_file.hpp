#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "segfuse/class_weights.hpp"
#include "segfuse/core.hpp"
#include "segfuse/io/file.hpp"

namespace segfuse {

/// Tab-separated weights document:
///
///   segfuse-weights <tab> 1
///   mode    <tab> normalized|raw
///   delta   <tab> <value>
///   classes <tab> <count>
///   id <tab> name <tab> freq <tab> w_uda_raw <tab> w_uda <tab> w_dep
///   <one row per class>
///
/// Doubles are printed with 17 significant digits so the file round-trips to
/// the exact in-memory values.
struct WeightsFile {
    double delta = 1.02;
    bool normalized = true;
    std::vector<std::string> names;
    std::vector<double> freqs;
    ClassWeights weights;
};

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
    require(!s.empty(), where + ": empty number");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    require(end == s.c_str() + s.size(), where + ": malformed number '" + s + "'");
    return v;
}

inline long parse_long(const std::string& s, const std::string& where) {
    require(!s.empty(), where + ": empty integer");
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    require(end == s.c_str() + s.size(), where + ": malformed integer '" + s + "'");
    return v;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

} // namespace detail

inline std::string serialize_weights_file(const ClassTable& table, const FrequencyStats& stats,
                                          const ClassWeights& weights) {
    detail::require(weights.size() == table.size() && stats.freqs.size() == table.size(),
                    "weights file: class count mismatch between table, stats, and weights");
    std::string out;
    out += "segfuse-weights\t1\n";
    out += std::string("mode\t") + (weights.normalized ? "normalized" : "raw") + "\n";
    out += "delta\t" + detail::fmt_g17(weights.delta) + "\n";
    out += "classes\t" + std::to_string(table.size()) + "\n";
    out += "id\tname\tfreq\tw_uda_raw\tw_uda\tw_dep\n";
    for (size_t i = 0; i < table.size(); ++i) {
        const std::string& name = table.classes()[i].name;
        detail::require(name.find('\t') == std::string::npos &&
                            name.find('\n') == std::string::npos,
                        "weights file: class name contains a tab or newline");
        out += std::to_string(i) + "\t" + name + "\t" + detail::fmt_g17(stats.freqs[i]) + "\t" +
               detail::fmt_g17(weights.w_uda_raw[i]) + "\t" + detail::fmt_g17(weights.w_uda[i]) +
               "\t" + detail::fmt_g17(weights.w_dep[i]) + "\n";
    }
    return out;
}

inline void write_weights_file(const std::filesystem::path& path, const ClassTable& table,
                               const FrequencyStats& stats, const ClassWeights& weights) {
    write_text_atomic(path, serialize_weights_file(table, stats, weights));
}

inline WeightsFile parse_weights_file(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    auto next_line = [&]() {
        detail::require(static_cast<bool>(std::getline(in, line)), what + ": truncated file");
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        ++lineno;
        return detail::split_tabs(line);
    };

    auto header = next_line();
    detail::require(header.size() == 2 && header[0] == "segfuse-weights" && header[1] == "1",
                    what + ": not a weights file (bad header)");

    WeightsFile out;
    auto mode = next_line();
    detail::require(mode.size() == 2 && mode[0] == "mode" &&
                        (mode[1] == "normalized" || mode[1] == "raw"),
                    what + ": mode must be 'normalized' or 'raw'");
    out.normalized = mode[1] == "normalized";

    auto delta = next_line();
    detail::require(delta.size() == 2 && delta[0] == "delta", what + ": missing delta line");
    out.delta = detail::parse_double(delta[1], what + " line " + std::to_string(lineno));
    detail::require(out.delta > 1.0, what + ": delta must be > 1");

    auto classes = next_line();
    detail::require(classes.size() == 2 && classes[0] == "classes",
                    what + ": missing classes line");
    const long count = detail::parse_long(classes[1], what + " line " + std::to_string(lineno));
    detail::require(count >= 1 && count <= 255, what + ": class count must be in [1, 255]");

    auto cols = next_line();
    detail::require(cols.size() == 6 && cols[0] == "id" && cols[1] == "name" &&
                        cols[2] == "freq" && cols[3] == "w_uda_raw" && cols[4] == "w_uda" &&
                        cols[5] == "w_dep",
                    what + ": malformed column header");

    out.weights.delta = out.delta;
    out.weights.normalized = out.normalized;
    for (long i = 0; i < count; ++i) {
        auto row = next_line();
        const std::string where = what + " line " + std::to_string(lineno);
        detail::require(row.size() == 6, where + ": expected 6 tab-separated fields");
        detail::require(detail::parse_long(row[0], where) == i,
                        where + ": ids must run 0.." + std::to_string(count - 1) + " in order");
        detail::require(!row[1].empty(), where + ": empty class name");
        out.names.push_back(row[1]);
        const double f = detail::parse_double(row[2], where);
        detail::require(f >= 0.0 && f <= 1.0, where + ": freq must be in [0, 1]");
        out.freqs.push_back(f);
        const double raw = detail::parse_double(row[3], where);
        const double w_uda = detail::parse_double(row[4], where);
        const double w_dep = detail::parse_double(row[5], where);
        detail::require(std::isfinite(raw) && raw > 0.0, where + ": w_uda_raw must be positive");
        detail::require(std::isfinite(w_uda) && std::isfinite(w_dep),
                        where + ": weights must be finite");
        if (out.normalized)
            detail::require(w_uda > 0.0 && w_uda <= 1.0, where + ": w_uda must be in (0, 1]");
        detail::require(std::abs(w_uda + w_dep - 1.0) <= 1e-9 * std::max(1.0, std::abs(w_uda)),
                        where + ": w_uda and w_dep must sum to 1");
        out.weights.w_uda_raw.push_back(raw);
        out.weights.w_uda.push_back(w_uda);
        out.weights.w_dep.push_back(w_dep);
    }
    if (std::getline(in, line))
        detail::require(line.find_first_not_of(" \t\r") == std::string::npos,
                        what + ": trailing content after the last class row");
    if (out.normalized) {
        double mx = 0.0;
        for (double w : out.weights.w_uda)
            mx = std::max(mx, w);
        detail::require(std::abs(mx - 1.0) <= 1e-9, what + ": normalized w_uda must have max 1");
    }
    return out;
}

inline WeightsFile load_weights_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_weights_file(std::string(bytes.begin(), bytes.end()),
                              "weights file '" + path.string() + "'");
}

/// The weights in a file are only meaningful for the table they were computed
/// on; reject anything whose class list differs.
inline void check_weights_match(const WeightsFile& wf, const ClassTable& table) {
    detail::require(wf.names.size() == table.size(),
                    "weights file lists " + std::to_string(wf.names.size()) +
                        " classes but the class table has " + std::to_string(table.size()));
    for (size_t i = 0; i < table.size(); ++i)
        detail::require(wf.names[i] == table.classes()[i].name,
                        "weights file class " + std::to_string(i) + " is '" + wf.names[i] +
                            "' but the class table has '" + table.classes()[i].name + "'");
}

} // namespace segfuse
