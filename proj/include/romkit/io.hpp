#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace romkit::io {

/// Little-endian binary encoder used by the model and basis formats.
class BinaryWriter {
 public:
  void raw(std::string_view bytes) { buffer_.append(bytes); }
  void u32(std::uint32_t value);
  void f64(double value);
  void vector(const Eigen::VectorXd& v);
  void matrix_row_major(const Eigen::MatrixXd& m);

  const std::string& bytes() const { return buffer_; }

 private:
  std::string buffer_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string_view bytes) : bytes_(bytes) {}

  void expect(std::string_view magic);
  std::uint32_t u32();
  double f64();
  Eigen::VectorXd vector(Eigen::Index size);
  Eigen::MatrixXd matrix_row_major(Eigen::Index rows, Eigen::Index cols);
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view take(std::size_t count);

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Shortest representation that round-trips, '.' decimal separator.
std::string format_double(double value);

/// CSV with one header line, ',' separators and '\n' line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(double value);
  CsvWriter& cell(std::int64_t value);
  CsvWriter& cell(int value) { return cell(static_cast<std::int64_t>(value)); }
  void end_row();

  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const { write_file(path, text_); }

 private:
  std::size_t columns_;
  std::size_t filled_ = 0;
  std::string text_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const;
  /// All cells as numbers, rows x cols.
  Eigen::MatrixXd numeric() const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Git blob object id: SHA-1 of "blob <size>\0" followed by the contents.
std::string git_blob_digest(std::string_view contents);
std::string sha256_hex(std::string_view contents);

}  // namespace romkit::io
