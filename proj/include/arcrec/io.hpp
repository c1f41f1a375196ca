#pragma once

#include <string>
#include <string_view>

namespace arcrec {

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace arcrec
