#include "hetreg/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hetreg {

namespace {

std::string_view trimmed(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

Matrix load_csv(const std::string &path, bool has_header) {
    std::ifstream file(path);
    if (!file) throw IoError("cannot open " + path);

    std::vector<double> values;
    std::size_t cols = 0, rows = 0, line_no = 0;
    std::string line;
    while (std::getline(file, line)) {
        ++line_no;
        if (has_header && line_no == 1) continue;
        if (trimmed(line).empty()) continue;

        std::size_t col = 0;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            const std::string_view cell =
                trimmed(std::string_view(line).substr(pos, comma == std::string::npos
                                                               ? std::string::npos
                                                               : comma - pos));
            ++col;
            const std::string cell_str(cell);
            char *end = nullptr;
            const double v = std::strtod(cell_str.c_str(), &end);
            if (cell_str.empty() || end != cell_str.c_str() + cell_str.size())
                throw ParseError(line_no, col, "not a number: '" + cell_str + "'");
            values.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cols == 0) {
            cols = col;
        } else if (col != cols) {
            throw ParseError(line_no, col, "expected " + std::to_string(cols) + " columns");
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(line_no, 0, "no data rows");
    return Matrix(rows, cols, std::move(values));
}

void write_csv(const std::string &path, const Matrix &m, const std::string &header) {
    std::ofstream file(path);
    if (!file) throw IoError("cannot open " + path + " for writing");
    if (!header.empty()) file << header << "\n";
    char buf[40];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
            if (c) file << ',';
            file << buf;
        }
        file << "\n";
    }
    if (!file.good()) throw IoError("failed writing " + path);
}

} // namespace hetreg
