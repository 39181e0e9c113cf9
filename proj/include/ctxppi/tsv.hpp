#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ctxppi/errors.hpp"

namespace ctxppi {

inline std::vector<std::string> split_tab(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline double parse_double(const std::string& s, const std::string& file, std::size_t row) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError(file + ":" + std::to_string(row) + ": bad number '" + s + "'");
    return v;
}

// Streams non-empty lines (comments skipped when `allow_comments`) to `fn(row, line)`.
// Row numbers are 1-based positions in the physical file.
template <typename Fn>
void for_each_tsv_line(const std::string& path, bool allow_comments, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        if (allow_comments && line[0] == '#') continue;
        fn(row, line);
    }
}

inline void require_header(const std::vector<std::string>& got,
                           const std::vector<std::string>& want, const std::string& file) {
    if (got.size() < want.size())
        throw ParseError(file + ":1: expected header with " + std::to_string(want.size()) +
                         " columns, got " + std::to_string(got.size()));
    for (std::size_t i = 0; i < want.size(); ++i)
        if (got[i] != want[i])
            throw ParseError(file + ":1: expected header column '" + want[i] + "', got '" +
                             got[i] + "'");
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write file: " + path);
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Fixed float formatting for all emitted artifacts; round-trips doubles exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace ctxppi
