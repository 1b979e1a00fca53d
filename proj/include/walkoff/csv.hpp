#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "walkoff/error.hpp"

namespace walkoff::csv {

/// Splits one CSV line. Double-quoted fields may contain commas and `""` escapes.
inline std::vector<std::string> split_line(std::string_view line)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline void strip_eol(std::string& line)
{
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
}

/// A header-addressed table held in memory.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;  // 1-based source line of each row

    /// Column index by name, or SchemaError naming the missing column.
    std::size_t column(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        throw SchemaError("missing required column '" + std::string(name) + "'");
    }

    bool has_column(std::string_view name) const
    {
        for (const auto& h : header)
            if (h == name)
                return true;
        return false;
    }
};

inline Table read_table(std::istream& in)
{
    Table t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        strip_eol(line);
        if (!have_header) {
            // Tolerate a UTF-8 byte-order mark.
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
                line.erase(0, 3);
            t.header = split_line(line);
            have_header = true;
            continue;
        }
        if (line.empty())
            continue;
        auto fields = split_line(line);
        if (fields.size() != t.header.size())
            throw ParseError(lineno, "expected " + std::to_string(t.header.size()) +
                                         " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.row_lines.push_back(lineno);
    }
    return t;
}

/// Quotes a field only when it needs it.
inline std::string escape(std::string_view field)
{
    if (field.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += "\"\"";
        else
            out.push_back(c);
    }
    out += '"';
    return out;
}

} // namespace walkoff::csv
