#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sdfa::io {

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Numeric block of a table starting at `first_col`; every row must have the
// header's width.
Eigen::MatrixXd to_matrix(const CsvTable& table, std::size_t first_col, const std::string& context);
void append_matrix_rows(CsvTable& table, const Eigen::MatrixXd& m);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
void ensure_directory(const std::filesystem::path& dir);

// FNV-1a 64 of the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace sdfa::io
