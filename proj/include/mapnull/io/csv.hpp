#pragma once

#include "mapnull/data.hpp"
#include "mapnull/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace mapnull::io {

/// Numeric table: first row headers, first column row ids.
struct CsvTable {
    std::string id_header;
    std::vector<std::string> headers; // value columns only
    std::vector<std::string> row_ids;
    Matrix values;

    Index column(const std::string& name) const
    {
        const auto it = std::find(headers.begin(), headers.end(), name);
        if (it == headers.end())
            throw Error(ErrorKind::config, "column '" + name + "' not found in input");
        return static_cast<Index>(it - headers.begin());
    }
};

namespace detail {

// Splits one record on commas. Double-quoted fields may contain commas and
// doubled quotes; embedded newlines are not supported.
inline std::vector<std::string> split_record(const std::string& line, std::size_t line_no)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
                field += '"', ++i;
            else if (c == '"')
                quoted = false;
            else
                field += c;
        } else if (c == '"' && field.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    if (quoted)
        throw Error(ErrorKind::input, "line " + std::to_string(line_no) + ": unterminated quoted field");
    out.push_back(std::move(field));
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& source = "input")
{
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
                line.erase(0, 3);
            if (!detail::trim(line).empty())
                return true;
        }
        return false;
    };
    if (!next_line())
        throw Error(ErrorKind::input, source + ": empty file");
    auto header = detail::split_record(line, line_no);
    if (header.size() < 2)
        throw Error(ErrorKind::input, source + ": header needs an id column and at least one value column");
    t.id_header = detail::trim(header[0]);
    for (std::size_t j = 1; j < header.size(); ++j) {
        const std::string h = detail::trim(header[j]);
        if (h.empty())
            throw Error(ErrorKind::input, source + ": empty header in column " + std::to_string(j + 1));
        if (std::find(t.headers.begin(), t.headers.end(), h) != t.headers.end())
            throw Error(ErrorKind::input, source + ": duplicate header '" + h + "'");
        t.headers.push_back(h);
    }

    std::vector<double> buf;
    while (next_line()) {
        const auto fields = detail::split_record(line, line_no);
        if (fields.size() != header.size())
            throw Error(ErrorKind::input, source + ": line " + std::to_string(line_no) + " has " +
                                              std::to_string(fields.size()) + " fields, expected " +
                                              std::to_string(header.size()));
        t.row_ids.push_back(detail::trim(fields[0]));
        for (std::size_t j = 1; j < fields.size(); ++j) {
            const std::string f = detail::trim(fields[j]);
            double v = 0.0;
            const char* end = f.data() + f.size();
            const auto [ptr, ec] = std::from_chars(f.data(), end, v);
            if (f.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
                throw Error(ErrorKind::input, source + ": line " + std::to_string(line_no) + ", column '" +
                                                  t.headers[j - 1] + "': missing or non-numeric value '" + f +
                                                  "'");
            buf.push_back(v);
        }
    }
    const auto n = static_cast<Index>(t.row_ids.size());
    const auto p = static_cast<Index>(t.headers.size());
    if (n == 0)
        throw Error(ErrorKind::input, source + ": no data rows");
    t.values.resize(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j)
            t.values(i, j) = buf[static_cast<std::size_t>(i * p + j)];
    return t;
}

inline CsvTable read_csv_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::input, "cannot open '" + path + "'");
    return read_csv(in, path);
}

/// Writes a table in the same dialect; values use shortest round-trip form.
inline std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_csv(std::ostream& out, const DataMatrix& x, const std::string& id_header = "id")
{
    out << id_header;
    for (const auto& h : x.feature_names())
        out << ',' << h;
    out << '\n';
    for (Index i = 0; i < x.rows(); ++i) {
        out << x.row_ids()[static_cast<std::size_t>(i)];
        for (Index j = 0; j < x.cols(); ++j)
            out << ',' << format_double(x(i, j));
        out << '\n';
    }
}

} // namespace mapnull::io
