#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ossireg {

/// Whole-file binary read/write; throw Error(kInvalidInput) on I/O failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ossireg
