#pragma once

// Minimal RFC-4180 reader and writer.

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "requal/error.hpp"

namespace requal::csv {

using Row = std::vector<std::string>;

inline std::string quote(std::string_view field) {
    const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << quote(row[i]);
    }
    os << "\r\n";
}

/// Parses the whole stream. Accepts LF or CRLF line endings and a UTF-8 BOM.
inline std::vector<Row> read_all(std::istream& is) {
    std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (data.rfind("\xEF\xBB\xBF", 0) == 0) data.erase(0, 3);
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < data.size()) {
        const char c = data[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                in_quotes = false;
            } else {
                field += c;
            }
            ++i;
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
            end_row();
            ++i;
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw Error(ErrorKind::ParseError, "unterminated quoted CSV field");
    if (field_started || !row.empty()) end_row();
    return rows;
}

}  // namespace requal::csv
