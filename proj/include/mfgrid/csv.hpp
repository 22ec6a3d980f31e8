#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace mfgrid {

/// 17 significant digits ("%.17g"); "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

/// Comma-joined row terminated by '\n'.
std::string csv_row(std::span<const double> values);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace mfgrid
