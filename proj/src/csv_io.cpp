#include "starts/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "starts/errors.hpp"

namespace starts {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    if (cell.empty()) throw ParseError("missing value", row, col);
    double v = 0.0;
    const char* first = cell.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("not a number: '" + cell + "'", row, col);
    }
    return v;
}

// Header row plus every nonblank numeric row.
LabeledMatrix read_table(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    LabeledMatrix out;
    while (std::getline(in, line)) {
        ++row;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw ParseError("empty input");
    out.labels = split_line(line);
    const std::size_t t = out.labels.size();
    for (std::size_t j = 0; j < t; ++j) {
        if (out.labels[j].empty()) throw ParseError("empty header label", row, j + 1);
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() < t) throw ParseError("missing value", row, cells.size() + 1);
        if (cells.size() > t) throw ParseError("too many values", row, t + 1);
        std::vector<double> values(t);
        for (std::size_t j = 0; j < t; ++j) values[j] = parse_cell(cells[j], row, j + 1);
        rows.push_back(std::move(values));
    }
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return out;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

}  // namespace

LabeledMatrix read_cov_csv(std::istream& in) {
    LabeledMatrix m = read_table(in);
    const auto t = static_cast<Eigen::Index>(m.labels.size());
    if (m.values.rows() != t) {
        throw ParseError("covariance needs " + std::to_string(t) + " rows, found " +
                             std::to_string(m.values.rows()),
                         static_cast<std::size_t>(m.values.rows()) + 2);
    }
    for (Eigen::Index i = 0; i < t; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(m.values(i, j) - m.values(j, i)) > 1e-8) {
                throw DomainError("covariance is not symmetric at row " + std::to_string(i + 2) + ", column " +
                                  std::to_string(j + 1));
            }
        }
    }
    return m;
}

LabeledMatrix read_cov_csv_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_cov_csv(in);
}

LabeledMatrix read_data_csv(std::istream& in) { return read_table(in); }

LabeledMatrix read_data_csv_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_data_csv(in);
}

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void write_cov_csv(std::ostream& out, const LabeledMatrix& m) {
    for (std::size_t j = 0; j < m.labels.size(); ++j) out << (j ? "," : "") << m.labels[j];
    out << '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << (j ? "," : "") << format_double(m.values(i, j));
        out << '\n';
    }
}

}  // namespace starts
