#pragma once

#include <filesystem>
#include <string>

namespace fpsam {

// Whole-file read; throws FormatError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Write-temp-then-rename so partially written files are never observed.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fpsam
