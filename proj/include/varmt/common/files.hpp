#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace varmt::files {

/// Reads a UTF-8 text file, one entry per line; a trailing '\r' is dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

std::string sha256_string(const std::string& data);

}  // namespace varmt::files
