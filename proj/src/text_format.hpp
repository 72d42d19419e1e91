#pragma once

#include "lhm/errors.hpp"

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace lhm {

// Shortest representation that round-trips exactly.
inline std::string format_double(double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view field, std::size_t line_no)
{
    while (!field.empty() && field.front() == ' ') {
        field.remove_prefix(1);
    }
    while (!field.empty() && field.back() == ' ') {
        field.remove_suffix(1);
    }
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && field.front() == '+') {
        ++first;
    }
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || field.empty()) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "' as a number");
    }
    return v;
}

} // namespace lhm
