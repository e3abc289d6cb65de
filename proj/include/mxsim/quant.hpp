#pragma once
// Block quantization on top of the element formats: standard 32-element MX
// vector blocks, 16-element BDR vector blocks (one shared E8M0 scale plus a
// 1-bit micro-exponent per 2-element pair), and 64-element square blocks
// (8x8 tile, one scale) that transpose without requantization.
//
// Shared-scale rule: scale = 2^(floor(log2 max_abs) - emax), i.e. the largest
// power of two in the block divided by the largest power of two the element
// format can represent. All-zero blocks use scale 1 (exp_code 127). Scales
// clamp to the E8M0 range [2^-127, 2^127]; exp_code 255 is reserved and never
// produced.
//
// Binary layout (serialize/deserialize):
//   header, 16 bytes: "MXQ1", u8 version(=1), u8 format, u8 geometry,
//     u8 orientation, u32le rows, u32le cols
//   per block, grid row-major: scale byte, then (BDR only) micro byte
//     (bit i = pair i), then element codes packed LSB-first (8-bit formats
//     1 per byte, FP6 4 per 3 bytes, FP4 2 per byte).
// Block payloads are whole bytes for every geometry/format combination, so
// the serialized size is exactly the footprint the cost model charges.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mxsim/formats.hpp"
#include "mxsim/matrix.hpp"

namespace mxsim {

enum class BlockGeometry : uint8_t {
  Vector32 = 0,
  Vector16Bdr,
  Square8x8,
};
inline constexpr int kNumGeometries = 3;

int geometry_elems(BlockGeometry g);  // 32 / 16 / 64
const char* geometry_name(BlockGeometry g);
BlockGeometry geometry_from_name(std::string_view name);

struct MxBlock {
  ElementFormat format = ElementFormat::Int8;
  BlockGeometry geometry = BlockGeometry::Vector32;
  SharedScale scale;
  // First geometry_elems(geometry) entries are used; square tiles row-major.
  std::array<uint8_t, 64> codes{};
  // Vector16Bdr only: micro_exps[i] in {0,1} scales elements 2i, 2i+1 by an
  // extra 2^micro on top of the shared scale.
  std::array<uint8_t, 8> micro_exps{};
};

MxBlock quantize_block(std::span<const float> values, ElementFormat format,
                       BlockGeometry geometry);
void dequantize_block(const MxBlock& block, std::span<float> out);

// How a matrix is carved into blocks. Vector geometries run blocks along a
// row (RowBlocks) or down a column (ColBlocks); Square8x8 tiles both ways at
// once, which is what lets one quantized copy serve the transposed pass.
enum class BlockOrientation : uint8_t {
  RowBlocks = 0,
  ColBlocks,
  Square,
};
const char* orientation_name(BlockOrientation o);
BlockOrientation orientation_from_name(std::string_view name);

struct QuantizedMatrix {
  int rows = 0;  // logical (unpadded) dims; ragged edges are zero-padded
  int cols = 0;
  ElementFormat format = ElementFormat::Int8;
  BlockGeometry geometry = BlockGeometry::Vector32;
  BlockOrientation orientation = BlockOrientation::RowBlocks;
  int grid_rows = 0;
  int grid_cols = 0;
  std::vector<MxBlock> blocks;  // grid row-major

  const MxBlock& block_at(int gr, int gc) const {
    return blocks[static_cast<size_t>(gr) * grid_cols + gc];
  }
  MxBlock& block_at(int gr, int gc) {
    return blocks[static_cast<size_t>(gr) * grid_cols + gc];
  }
  // Dequantized value of one element (exact; padding-free positions only).
  float value_at(int r, int c) const;
};

QuantizedMatrix quantize_matrix(const Matrix& m, ElementFormat format,
                                BlockGeometry geometry,
                                BlockOrientation orientation);
Matrix dequantize_matrix(const QuantizedMatrix& qm);

// Square8x8 only: transposes the block grid and each tile in place without
// touching scales or codes. Vector geometries are rejected -- they would need
// a requantization pass.
QuantizedMatrix transpose_quantized(const QuantizedMatrix& qm);

size_t block_payload_bits(ElementFormat format, BlockGeometry geometry);
std::vector<uint8_t> serialize(const QuantizedMatrix& qm);
QuantizedMatrix deserialize(std::span<const uint8_t> bytes);
std::string quantized_debug_json(const QuantizedMatrix& qm);

}  // namespace mxsim
