#include "mxsim/matrix.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mxsim {

namespace {

constexpr char kMagic[4] = {'M', 'X', 'M', '1'};

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

void write_u32le(unsigned char* p, uint32_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

Matrix parse_csv(const std::string& text, const std::string& path) {
  std::vector<std::vector<float>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<float> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      float v = 0.0f;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw std::invalid_argument(path + ": malformed CSV number in '" +
                                    line + "'");
      }
      row.push_back(v);
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p < end) {
        if (*p != ',')
          throw std::invalid_argument(path + ": expected ',' in '" + line +
                                      "'");
        ++p;
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument(path + ": ragged CSV rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": empty matrix file");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  return m;
}

Matrix parse_binary(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 16)
    throw std::invalid_argument(path + ": truncated matrix header");
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  uint32_t rows = read_u32le(p + 4);
  uint32_t cols = read_u32le(p + 8);
  size_t want = 16 + static_cast<size_t>(rows) * cols * sizeof(float);
  if (rows == 0 || cols == 0 || bytes.size() != want)
    throw std::invalid_argument(path + ": matrix size mismatch");
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  std::memcpy(m.data.data(), bytes.data() + 16, m.size() * sizeof(float));
  return m;
}

}  // namespace

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
  return t;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  return std::memcmp(a.data.data(), b.data.data(),
                     a.size() * sizeof(float)) == 0;
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
    return parse_binary(bytes, path);
  return parse_csv(bytes, path);
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  char buf[64];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      // %.9g round-trips every float exactly and is locale-independent here.
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(m.at(r, c)));
      out << buf << (c + 1 < m.cols ? "," : "\n");
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_matrix_binary(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  unsigned char header[16] = {};
  std::memcpy(header, kMagic, 4);
  write_u32le(header + 4, static_cast<uint32_t>(m.rows));
  write_u32le(header + 8, static_cast<uint32_t>(m.cols));
  write_u32le(header + 12, 0);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mxsim
