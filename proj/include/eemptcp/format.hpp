#pragma once

#include <string>
#include <vector>

namespace eemptcp {

/// Six significant digits, "%.6g"; "inf", "-inf" and "nan" spelled out.
std::string fmt6(double v);

/// `v` rounded to six significant digits (non-finite values pass through).
double round6(double v);

/// Joins fields with commas, quoting any field that contains a comma or quote.
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace eemptcp
