#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "isgd/core.hpp"

namespace isgd::io {

/// `%.17g`: 17 significant digits, round-trips every double.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Single column of numbers; an optional non-numeric header line is skipped.
std::vector<double> read_column(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Pretty-printed JSON with every floating-point value written by format_double.
std::string dump_json(const nlohmann::json& value);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace isgd::io
