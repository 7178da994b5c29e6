#include "romkit/io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "romkit/error.hpp"

namespace romkit::io {

void BinaryWriter::u32(std::uint32_t value) {
  for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
}

void BinaryWriter::f64(double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryWriter::matrix_row_major(const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

std::string_view BinaryReader::take(std::size_t count) {
  if (bytes_.size() - pos_ < count)
    fail(ErrorCategory::io, "binary data truncated at byte " + std::to_string(pos_));
  const auto out = bytes_.substr(pos_, count);
  pos_ += count;
  return out;
}

void BinaryReader::expect(std::string_view magic) {
  if (take(magic.size()) != magic)
    fail(ErrorCategory::io, "bad magic, expected \"" + std::string(magic) + "\"");
}

std::uint32_t BinaryReader::u32() {
  const auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double BinaryReader::f64() {
  const auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return std::bit_cast<double>(v);
}

Eigen::VectorXd BinaryReader::vector(Eigen::Index size) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = f64();
  return v;
}

Eigen::MatrixXd BinaryReader::matrix_row_major(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCategory::io, "write failed for " + path.string());
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

CsvWriter& CsvWriter::cell(std::string_view text) {
  if (filled_) text_ += ',';
  text_.append(text);
  ++filled_;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }

CsvWriter& CsvWriter::cell(std::int64_t value) { return cell(std::to_string(value)); }

void CsvWriter::end_row() {
  require(filled_ == columns_, "CSV row has " + std::to_string(filled_) + " cells, header has " +
                                   std::to_string(columns_));
  text_ += '\n';
  filled_ = 0;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(ErrorCategory::io, "CSV column \"" + std::string(name) + "\" not found");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const auto& s = rows.at(row).at(col);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCategory::io, "CSV cell \"" + s + "\" is not a number");
  return v;
}

Eigen::MatrixXd CsvTable::numeric() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < header.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(r, c);
  return m;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  bool first = true;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        fail(ErrorCategory::io, "CSV row with " + std::to_string(cells.size()) +
                                    " cells, header has " + std::to_string(table.header.size()));
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) fail(ErrorCategory::io, "CSV has no header line");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

namespace {

std::string digest_hex(const EVP_MD* md, std::string_view prefix, std::string_view contents) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestInit_ex(ctx, md, nullptr);
  EVP_DigestUpdate(ctx, prefix.data(), prefix.size());
  EVP_DigestUpdate(ctx, contents.data(), contents.size());
  EVP_DigestFinal_ex(ctx, out, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[out[i] >> 4];
    hex += kHex[out[i] & 0xF];
  }
  return hex;
}

}  // namespace

std::string git_blob_digest(std::string_view contents) {
  std::string header = "blob " + std::to_string(contents.size());
  header.push_back('\0');
  return digest_hex(EVP_sha1(), header, contents);
}

std::string sha256_hex(std::string_view contents) { return digest_hex(EVP_sha256(), {}, contents); }

}  // namespace romkit::io
