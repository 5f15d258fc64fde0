#include "sdfa/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sdfa/errors.hpp"

namespace sdfa::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ValidationError("non-numeric value '" + std::string(text) + "' in " + context);
  return v;
}

long long parse_int(std::string_view text, const std::string& context) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ValidationError("non-integer value '" + std::string(text) + "' in " + context);
  return v;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty file " + path.string());
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw ShapeError("row width " + std::to_string(cells.size()) + " != header width " +
                       std::to_string(table.header.size()) + " in " + path.string());
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ostringstream out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  write_text(path, out.str());
}

Eigen::MatrixXd to_matrix(const CsvTable& table, std::size_t first_col, const std::string& context) {
  if (table.header.size() < first_col) throw ShapeError("too few columns in " + context);
  const auto cols = static_cast<Eigen::Index>(table.header.size() - first_col);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()), cols);
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), c) = parse_double(table.rows[r][first_col + static_cast<std::size_t>(c)], context);
  return m;
}

void append_matrix_rows(CsvTable& table, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(format_double(m(r, c)));
    table.rows.push_back(std::move(row));
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string file_hash(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sdfa::io
