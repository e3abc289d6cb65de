#pragma once
// Dense row-major FP32 matrix with two interchange formats:
//   - CSV (text, one row per line, locale-independent)
//   - raw binary: 16-byte header ("MXM1", u32 rows, u32 cols, u32 reserved,
//     all little-endian) followed by rows*cols float32 values.
//
// load_matrix() sniffs the magic so either format can be passed anywhere a
// matrix file is expected.

#include <cstddef>
#include <string>
#include <vector>

namespace mxsim {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // row-major, rows * cols entries

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {}

  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  size_t size() const { return data.size(); }
};

Matrix transpose(const Matrix& m);

// Element-wise bit equality (distinguishes -0.0f from +0.0f, NaN == NaN).
bool bit_equal(const Matrix& a, const Matrix& b);

Matrix load_matrix(const std::string& path);
void save_matrix_csv(const Matrix& m, const std::string& path);
void save_matrix_binary(const Matrix& m, const std::string& path);

}  // namespace mxsim
