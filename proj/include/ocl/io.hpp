#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ocl {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view text);

/// Whole file as bytes; throws MissingArtifactError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ocl
