#include "mxsim/quant.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstring>

#include <json.hpp>

namespace mxsim {

namespace {

// Dequantized value of element idx of a block; exact in double (power-of-two
// scale times an exactly representable element value), and shown to fit FP32
// for every block the quantizer can produce.
double element_value(const MxBlock& b, int idx) {
  uint8_t code = b.codes[idx];
  if (is_nan_code(b.format, code) || is_inf_code(b.format, code))
    throw std::invalid_argument("block contains non-finite element codes");
  int eff = scale_exp_unbiased(b.scale);
  if (b.geometry == BlockGeometry::Vector16Bdr) eff += b.micro_exps[idx / 2];
  double v = std::ldexp(decode_element(b.format, code), eff);
  // Unreachable for blocks built by quantize_block (its micro-exponent guard
  // keeps values in range); deserialized streams could smuggle one in.
  if (std::fabs(v) > double(FLT_MAX))
    throw std::invalid_argument("block element exceeds FP32 range");
  return v;
}

// BDR pair quantization at one micro-exponent candidate. The squared error is
// exact in double: both v and the dequantized value are exact doubles within
// a factor of two of each other (Sterbenz), or one of them is zero.
struct PairCandidate {
  uint8_t codes[2];
  double sse = 0.0;
  bool eligible = true;  // false if a dequantized value would leave FP32 range
};

PairCandidate quantize_pair(ElementFormat fmt, const float* v, int eff_exp) {
  PairCandidate c;
  for (int k = 0; k < 2; ++k) {
    c.codes[k] = encode_element(fmt, std::ldexp(double(v[k]), -eff_exp));
    double dq = std::ldexp(decode_element(fmt, c.codes[k]), eff_exp);
    if (std::fabs(dq) > double(FLT_MAX)) c.eligible = false;
    double err = double(v[k]) - dq;
    c.sse += err * err;
  }
  return c;
}

int div_ceil(int a, int b) { return (a + b - 1) / b; }

// Geometry of one block's coverage inside a matrix: the element at block
// slot idx sits at matrix position (row0 + dr(idx), col0 + dc(idx)).
struct BlockSpan {
  int row0 = 0, col0 = 0;
  int drows = 1, dcols = 1;  // extent covered (row-major for squares)
};

BlockSpan block_span(const QuantizedMatrix& qm, int gr, int gc) {
  int n = geometry_elems(qm.geometry);
  switch (qm.orientation) {
    case BlockOrientation::RowBlocks:
      return {gr, gc * n, 1, n};
    case BlockOrientation::ColBlocks:
      return {gr * n, gc, n, 1};
    case BlockOrientation::Square:
      return {gr * 8, gc * 8, 8, 8};
  }
  throw contract_error("unknown orientation");
}

constexpr char kMagic[4] = {'M', 'X', 'Q', '1'};
constexpr uint8_t kVersion = 1;

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

uint32_t get_u32le(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

}  // namespace

int geometry_elems(BlockGeometry g) {
  switch (g) {
    case BlockGeometry::Vector32: return 32;
    case BlockGeometry::Vector16Bdr: return 16;
    case BlockGeometry::Square8x8: return 64;
  }
  throw contract_error("unknown block geometry");
}

const char* geometry_name(BlockGeometry g) {
  switch (g) {
    case BlockGeometry::Vector32: return "vector32";
    case BlockGeometry::Vector16Bdr: return "vector16_bdr";
    case BlockGeometry::Square8x8: return "square8x8";
  }
  throw contract_error("unknown block geometry");
}

BlockGeometry geometry_from_name(std::string_view name) {
  for (BlockGeometry g : {BlockGeometry::Vector32, BlockGeometry::Vector16Bdr,
                          BlockGeometry::Square8x8})
    if (name == geometry_name(g)) return g;
  throw std::invalid_argument("unknown block geometry: " + std::string(name));
}

const char* orientation_name(BlockOrientation o) {
  switch (o) {
    case BlockOrientation::RowBlocks: return "row_blocks";
    case BlockOrientation::ColBlocks: return "col_blocks";
    case BlockOrientation::Square: return "square";
  }
  throw contract_error("unknown block orientation");
}

BlockOrientation orientation_from_name(std::string_view name) {
  for (BlockOrientation o :
       {BlockOrientation::RowBlocks, BlockOrientation::ColBlocks,
        BlockOrientation::Square})
    if (name == orientation_name(o)) return o;
  throw std::invalid_argument("unknown block orientation: " +
                              std::string(name));
}

MxBlock quantize_block(std::span<const float> values, ElementFormat format,
                       BlockGeometry geometry) {
  int n = geometry_elems(geometry);
  require(int(values.size()) == n, "quantize_block: wrong element count");
  double max_abs = 0.0;
  for (float v : values) {
    if (!std::isfinite(v))
      throw std::invalid_argument("quantize_block: non-finite value in block");
    max_abs = std::max(max_abs, std::fabs(double(v)));
  }

  MxBlock b;
  b.format = format;
  b.geometry = geometry;
  b.scale = scale_for_max_abs(format, max_abs);
  int se = scale_exp_unbiased(b.scale);

  if (geometry != BlockGeometry::Vector16Bdr) {
    for (int i = 0; i < n; ++i)
      b.codes[i] = encode_element(format, std::ldexp(double(values[i]), -se));
    return b;
  }

  // BDR: per 2-element pair, pick the micro-exponent with the smaller squared
  // round-off; ties keep 0, and micro = 1 is skipped when doubling the scale
  // would dequantize outside FP32 range (keeps dequantize total and finite).
  for (int p = 0; p < n / 2; ++p) {
    PairCandidate c0 = quantize_pair(format, values.data() + p * 2, se);
    PairCandidate c1 = quantize_pair(format, values.data() + p * 2, se + 1);
    bool take1 = c1.eligible && c1.sse < c0.sse;
    const PairCandidate& c = take1 ? c1 : c0;
    b.micro_exps[p] = take1 ? 1 : 0;
    b.codes[p * 2] = c.codes[0];
    b.codes[p * 2 + 1] = c.codes[1];
  }
  return b;
}

void dequantize_block(const MxBlock& block, std::span<float> out) {
  int n = geometry_elems(block.geometry);
  require(int(out.size()) == n, "dequantize_block: wrong output size");
  for (int i = 0; i < n; ++i)
    out[i] = float(element_value(block, i));
}

float QuantizedMatrix::value_at(int r, int c) const {
  require(r >= 0 && r < rows && c >= 0 && c < cols,
          "value_at: index out of range");
  int n = geometry_elems(geometry);
  int gr = 0, gc = 0, idx = 0;
  switch (orientation) {
    case BlockOrientation::RowBlocks:
      gr = r, gc = c / n, idx = c % n;
      break;
    case BlockOrientation::ColBlocks:
      gr = r / n, gc = c, idx = r % n;
      break;
    case BlockOrientation::Square:
      gr = r / 8, gc = c / 8, idx = (r % 8) * 8 + c % 8;
      break;
  }
  return float(element_value(block_at(gr, gc), idx));
}

QuantizedMatrix quantize_matrix(const Matrix& m, ElementFormat format,
                                BlockGeometry geometry,
                                BlockOrientation orientation) {
  if (m.rows <= 0 || m.cols <= 0)
    throw std::invalid_argument("quantize_matrix: empty matrix");
  require((geometry == BlockGeometry::Square8x8) ==
              (orientation == BlockOrientation::Square),
          "quantize_matrix: geometry/orientation mismatch");

  QuantizedMatrix qm;
  qm.rows = m.rows;
  qm.cols = m.cols;
  qm.format = format;
  qm.geometry = geometry;
  qm.orientation = orientation;
  int n = geometry_elems(geometry);
  switch (orientation) {
    case BlockOrientation::RowBlocks:
      qm.grid_rows = m.rows;
      qm.grid_cols = div_ceil(m.cols, n);
      break;
    case BlockOrientation::ColBlocks:
      qm.grid_rows = div_ceil(m.rows, n);
      qm.grid_cols = m.cols;
      break;
    case BlockOrientation::Square:
      qm.grid_rows = div_ceil(m.rows, 8);
      qm.grid_cols = div_ceil(m.cols, 8);
      break;
  }
  qm.blocks.resize(size_t(qm.grid_rows) * qm.grid_cols);

  std::vector<float> buf(n);
  for (int gr = 0; gr < qm.grid_rows; ++gr) {
    for (int gc = 0; gc < qm.grid_cols; ++gc) {
      BlockSpan span = block_span(qm, gr, gc);
      std::fill(buf.begin(), buf.end(), 0.0f);  // ragged edges zero-pad
      for (int dr = 0; dr < span.drows; ++dr) {
        int r = span.row0 + dr;
        if (r >= m.rows) break;
        for (int dc = 0; dc < span.dcols; ++dc) {
          int c = span.col0 + dc;
          if (c >= m.cols) break;
          buf[dr * span.dcols + dc] = m.at(r, c);
        }
      }
      qm.block_at(gr, gc) = quantize_block(buf, format, geometry);
    }
  }
  return qm;
}

Matrix dequantize_matrix(const QuantizedMatrix& qm) {
  Matrix m(qm.rows, qm.cols);
  int n = geometry_elems(qm.geometry);
  std::vector<float> buf(n);
  for (int gr = 0; gr < qm.grid_rows; ++gr) {
    for (int gc = 0; gc < qm.grid_cols; ++gc) {
      dequantize_block(qm.block_at(gr, gc), buf);
      BlockSpan span = block_span(qm, gr, gc);
      for (int dr = 0; dr < span.drows; ++dr) {
        int r = span.row0 + dr;
        if (r >= qm.rows) break;
        for (int dc = 0; dc < span.dcols; ++dc) {
          int c = span.col0 + dc;
          if (c >= qm.cols) break;
          m.at(r, c) = buf[dr * span.dcols + dc];
        }
      }
    }
  }
  return m;
}

QuantizedMatrix transpose_quantized(const QuantizedMatrix& qm) {
  require(qm.geometry == BlockGeometry::Square8x8,
          "transpose_quantized: vector geometries require requantization");
  QuantizedMatrix t;
  t.rows = qm.cols;
  t.cols = qm.rows;
  t.format = qm.format;
  t.geometry = qm.geometry;
  t.orientation = qm.orientation;
  t.grid_rows = qm.grid_cols;
  t.grid_cols = qm.grid_rows;
  t.blocks.resize(qm.blocks.size());
  for (int gr = 0; gr < t.grid_rows; ++gr) {
    for (int gc = 0; gc < t.grid_cols; ++gc) {
      const MxBlock& src = qm.block_at(gc, gr);
      MxBlock& dst = t.block_at(gr, gc);
      dst = src;  // scale and metadata unchanged; no re-encoding
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) dst.codes[i * 8 + j] = src.codes[j * 8 + i];
    }
  }
  return t;
}

size_t block_payload_bits(ElementFormat format, BlockGeometry geometry) {
  size_t bits = size_t(geometry_elems(geometry)) *
                    format_info(format).total_bits +
                8;  // shared scale byte
  if (geometry == BlockGeometry::Vector16Bdr) bits += 8;  // micro-exp byte
  return bits;
}

std::vector<uint8_t> serialize(const QuantizedMatrix& qm) {
  std::vector<uint8_t> out;
  out.reserve(16 + qm.blocks.size() *
                       (block_payload_bits(qm.format, qm.geometry) / 8));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(uint8_t(qm.format));
  out.push_back(uint8_t(qm.geometry));
  out.push_back(uint8_t(qm.orientation));
  put_u32le(out, uint32_t(qm.rows));
  put_u32le(out, uint32_t(qm.cols));

  int n = geometry_elems(qm.geometry);
  int bits = format_info(qm.format).total_bits;
  for (const MxBlock& b : qm.blocks) {
    out.push_back(b.scale.exp_code);
    if (qm.geometry == BlockGeometry::Vector16Bdr) {
      uint8_t micro = 0;
      for (int p = 0; p < 8; ++p) micro |= uint8_t((b.micro_exps[p] & 1) << p);
      out.push_back(micro);
    }
    uint32_t acc = 0;
    int nbits = 0;
    for (int i = 0; i < n; ++i) {
      acc |= uint32_t(b.codes[i]) << nbits;
      nbits += bits;
      while (nbits >= 8) {
        out.push_back(uint8_t(acc));
        acc >>= 8;
        nbits -= 8;
      }
    }
    // n * bits is a whole number of bytes for every geometry/format pair.
    require(nbits == 0, "serialize: block payload not byte-aligned");
  }
  return out;
}

QuantizedMatrix deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 16)
    throw std::invalid_argument("quantized stream: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::invalid_argument("quantized stream: bad magic");
  if (bytes[4] != kVersion)
    throw std::invalid_argument("quantized stream: unsupported version");
  if (bytes[5] >= kNumFormats)
    throw std::invalid_argument("quantized stream: unknown format id");
  if (bytes[6] >= kNumGeometries)
    throw std::invalid_argument("quantized stream: unknown geometry id");
  if (bytes[7] > uint8_t(BlockOrientation::Square))
    throw std::invalid_argument("quantized stream: unknown orientation id");

  QuantizedMatrix qm;
  qm.format = ElementFormat(bytes[5]);
  qm.geometry = BlockGeometry(bytes[6]);
  qm.orientation = BlockOrientation(bytes[7]);
  qm.rows = int(get_u32le(bytes.data() + 8));
  qm.cols = int(get_u32le(bytes.data() + 12));
  if (qm.rows <= 0 || qm.cols <= 0)
    throw std::invalid_argument("quantized stream: bad dimensions");
  if ((qm.geometry == BlockGeometry::Square8x8) !=
      (qm.orientation == BlockOrientation::Square))
    throw std::invalid_argument(
        "quantized stream: geometry/orientation mismatch");

  int n = geometry_elems(qm.geometry);
  switch (qm.orientation) {
    case BlockOrientation::RowBlocks:
      qm.grid_rows = qm.rows;
      qm.grid_cols = div_ceil(qm.cols, n);
      break;
    case BlockOrientation::ColBlocks:
      qm.grid_rows = div_ceil(qm.rows, n);
      qm.grid_cols = qm.cols;
      break;
    case BlockOrientation::Square:
      qm.grid_rows = div_ceil(qm.rows, 8);
      qm.grid_cols = div_ceil(qm.cols, 8);
      break;
  }
  size_t nblocks = size_t(qm.grid_rows) * qm.grid_cols;
  size_t payload = block_payload_bits(qm.format, qm.geometry) / 8;
  if (bytes.size() != 16 + nblocks * payload)
    throw std::invalid_argument("quantized stream: size mismatch");

  int bits = format_info(qm.format).total_bits;
  uint8_t mask = uint8_t((1u << bits) - 1);
  const uint8_t* p = bytes.data() + 16;
  qm.blocks.resize(nblocks);
  for (MxBlock& b : qm.blocks) {
    b.format = qm.format;
    b.geometry = qm.geometry;
    if (*p == 255)
      throw std::invalid_argument("quantized stream: reserved scale code 255");
    b.scale.exp_code = *p++;
    if (qm.geometry == BlockGeometry::Vector16Bdr) {
      uint8_t micro = *p++;
      for (int i = 0; i < 8; ++i) b.micro_exps[i] = (micro >> i) & 1;
    }
    uint32_t acc = 0;
    int nbits = 0;
    for (int i = 0; i < n; ++i) {
      while (nbits < bits) {
        acc |= uint32_t(*p++) << nbits;
        nbits += 8;
      }
      uint8_t code = uint8_t(acc & mask);
      acc >>= bits;
      nbits -= bits;
      if (is_nan_code(qm.format, code) || is_inf_code(qm.format, code))
        throw std::invalid_argument(
            "quantized stream: non-finite element code");
      b.codes[i] = code;
    }
  }
  return qm;
}

std::string quantized_debug_json(const QuantizedMatrix& qm) {
  nlohmann::ordered_json j;
  j["rows"] = qm.rows;
  j["cols"] = qm.cols;
  j["format"] = format_info(qm.format).name;
  j["geometry"] = geometry_name(qm.geometry);
  j["orientation"] = orientation_name(qm.orientation);
  j["grid_rows"] = qm.grid_rows;
  j["grid_cols"] = qm.grid_cols;
  j["blocks"] = nlohmann::ordered_json::array();
  int n = geometry_elems(qm.geometry);
  for (const MxBlock& b : qm.blocks) {
    nlohmann::ordered_json jb;
    jb["scale_exp_code"] = int(b.scale.exp_code);
    if (qm.geometry == BlockGeometry::Vector16Bdr) {
      jb["micro_exps"] = nlohmann::ordered_json::array();
      for (int p = 0; p < 8; ++p) jb["micro_exps"].push_back(int(b.micro_exps[p]));
    }
    jb["codes"] = nlohmann::ordered_json::array();
    for (int i = 0; i < n; ++i) jb["codes"].push_back(int(b.codes[i]));
    j["blocks"].push_back(std::move(jb));
  }
  return j.dump(2) + "\n";
}

}  // namespace mxsim
