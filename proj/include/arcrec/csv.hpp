#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace arcrec::csv {

/// Splits one line on commas (no quoting); a trailing '\r' is dropped.
std::vector<std::string> split_line(std::string line);

/// "source:line" for error messages.
std::string where(const std::string& source, std::size_t line);

double parse_double(const std::string& s, const std::string& loc);
std::int64_t parse_int(const std::string& s, const std::string& loc);

}  // namespace arcrec::csv
