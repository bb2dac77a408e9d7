#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "starts/linalg.hpp"

namespace starts {

struct LabeledMatrix {
    std::vector<std::string> labels;
    Matrix values;
};

/// Covariance CSV: one header row of T labels, then T rows of T decimals.
/// Throws ParseError (1-based row/column, header is row 1) on a missing,
/// extra or non-numeric cell, and DomainError when asymmetric beyond 1e-8.
LabeledMatrix read_cov_csv(std::istream& in);
LabeledMatrix read_cov_csv_file(const std::string& path);

/// Raw panel data: header row of T labels, then one row of T decimals per person.
LabeledMatrix read_data_csv(std::istream& in);
LabeledMatrix read_data_csv_file(const std::string& path);

void write_cov_csv(std::ostream& out, const LabeledMatrix& m);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

}  // namespace starts
