#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace dscore {

inline constexpr const char* kToolVersion = "1.0.0";

using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

/// Splits one comma-separated line. Double-quoted fields may contain commas;
/// a doubled quote inside a quoted field is a literal quote.
std::vector<std::string> split_csv_line(std::string_view line);

std::string trim(std::string_view s);

/// Fixed-point formatting with `precision` decimals; "-0.000" is printed as "0.000".
std::string format_fixed(double value, int precision);

/// Parses "YYYY-MM-DDTHH:MM:SS[.ffffff][Z]" (a space may replace the 'T').
/// Throws InputError on malformed text.
Timestamp parse_iso8601(std::string_view text);

std::string format_iso8601(Timestamp t);

double median(std::vector<double> values);

}  // namespace dscore
