// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal CSV emission/parsing. Floats are written with 12 significant
// digits; cells never contain commas (vectors are ';'-joined), so parsing is
// a plain split.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgsim::csv {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string join(const std::vector<double>& values, char sep = ';') {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(sep);
        out += fmt(values[i]);
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::vector<std::string>& add_row() {
        rows.emplace_back();
        rows.back().reserve(header.size());
        return rows.back();
    }

    std::string to_string() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) os << ',';
            os << header[i];
        }
        os << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) os << ',';
                os << row[i];
            }
            os << '\n';
        }
        return os.str();
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("csv: cannot write '" + path + "'");
        out << to_string();
    }

    static Table read(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("csv: cannot read '" + path + "'");
        Table t;
        std::string line;
        bool first = true;
        auto split = [](const std::string& s) {
            std::vector<std::string> cells;
            std::string cell;
            std::istringstream is(s);
            while (std::getline(is, cell, ',')) cells.push_back(cell);
            if (!s.empty() && s.back() == ',') cells.emplace_back();
            return cells;
        };
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (first) {
                t.header = split(line);
                first = false;
            } else {
                t.rows.push_back(split(line));
            }
        }
        return t;
    }
};

}  // namespace mgsim::csv
