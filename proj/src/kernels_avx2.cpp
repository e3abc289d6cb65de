// AVX2 block-MAC kernel: Int8 and Fp4 modes vectorized across the eight
// outputs of a block row. Integer products are exact in vector lanes, and
// the FP32 tail multiplies by the exact power-of-two scale 2^(exp+se) --
// bit-identical to the datapath's ldexp/convert/add sequence because both
// are single correctly-rounded operations on the same exact value. Blocks
// whose scale exponent falls outside the exactly-representable float range
// [-149, 127], and the data-dependent Fp8Fp6 alignment, take the scalar
// path.
#include "mxsim/kernels.hpp"

#ifdef MXSIM_WITH_AVX2

#include <immintrin.h>

#include <cfloat>
#include <cmath>
#include <cstring>

#include "kernels_detail.hpp"

namespace mxsim {
namespace {

using detail::kFp4Value;

const __m256 kAbsMask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7FFFFFFF));
const __m256 kSignMask =
    _mm256_castsi256_ps(_mm256_set1_epi32(int(0x80000000u)));
const __m256 kFltMax = _mm256_set1_ps(FLT_MAX);

// Clamp-and-accumulate one product vector, mirroring mac_step's tail:
// overflowing lanes pin to +-FLT_MAX and set the sticky saturation mask.
inline void vector_tail(__m256& acc, __m256& sat, __m256 f) {
  __m256 over_f = _mm256_cmp_ps(_mm256_and_ps(f, kAbsMask), kFltMax,
                                _CMP_GT_OQ);
  __m256 f_clamped = _mm256_or_ps(_mm256_and_ps(f, kSignMask), kFltMax);
  f = _mm256_blendv_ps(f, f_clamped, over_f);
  sat = _mm256_or_ps(sat, over_f);

  __m256 sum = _mm256_add_ps(acc, f);
  __m256 over_a = _mm256_cmp_ps(_mm256_and_ps(sum, kAbsMask), kFltMax,
                                _CMP_GT_OQ);
  __m256 a_clamped = _mm256_or_ps(_mm256_and_ps(sum, kSignMask), kFltMax);
  acc = _mm256_blendv_ps(sum, a_clamped, over_a);
  sat = _mm256_or_ps(sat, over_a);
}

inline __m256 load_acc(const MacState* row) {
  float tmp[kBlockDim];
  for (int j = 0; j < kBlockDim; ++j) tmp[j] = row[j].accumulator;
  return _mm256_loadu_ps(tmp);
}

inline void store_acc(MacState* row, __m256 acc, __m256 sat) {
  float ta[kBlockDim], ts[kBlockDim];
  _mm256_storeu_ps(ta, acc);
  _mm256_storeu_ps(ts, sat);
  for (int j = 0; j < kBlockDim; ++j) {
    row[j].accumulator = ta[j];
    uint32_t bits;
    std::memcpy(&bits, &ts[j], sizeof bits);
    if (bits != 0) row[j].saturated = true;
  }
}

void avx2_int8(const uint8_t* a, const uint8_t* b, int se, MacState* grid) {
  const __m256 scale = _mm256_set1_ps(std::ldexp(1.0f, se - 12));
  for (int i = 0; i < kBlockDim; ++i) {
    __m256 acc = load_acc(grid + i * kBlockDim);
    __m256 sat = _mm256_setzero_ps();
    for (int k = 0; k < kBlockDim; ++k) {
      __m256i bv = _mm256_cvtepi8_epi32(_mm_loadl_epi64(
          reinterpret_cast<const __m128i*>(b + k * kBlockDim)));
      __m256i p = _mm256_mullo_epi32(
          _mm256_set1_epi32(int8_t(a[i * kBlockDim + k])), bv);
      vector_tail(acc, sat, _mm256_mul_ps(_mm256_cvtepi32_ps(p), scale));
    }
    store_acc(grid + i * kBlockDim, acc, sat);
  }
}

void avx2_fp4(const uint8_t* a, const uint8_t* b, int se, MacState* grid) {
  int32_t va[kBlockElems], vb[kBlockElems];
  for (int i = 0; i < kBlockElems; ++i) {
    va[i] = kFp4Value[a[i] & 15];
    vb[i] = kFp4Value[b[i] & 15];
  }
  const __m256 scale = _mm256_set1_ps(std::ldexp(1.0f, se - 2));
  for (int i = 0; i < kBlockDim; ++i) {
    __m256i n = _mm256_setzero_si256();
    for (int k = 0; k < kBlockDim; ++k) {
      __m256i row = _mm256_loadu_si256(
          reinterpret_cast<const __m256i*>(vb + k * kBlockDim));
      n = _mm256_add_epi32(
          n, _mm256_mullo_epi32(_mm256_set1_epi32(va[i * kBlockDim + k]),
                                row));
    }
    __m256 acc = load_acc(grid + i * kBlockDim);
    __m256 sat = _mm256_setzero_ps();
    vector_tail(acc, sat, _mm256_mul_ps(_mm256_cvtepi32_ps(n), scale));
    store_acc(grid + i * kBlockDim, acc, sat);
  }
}

}  // namespace

void block_mac_avx2(const MacVariant& variant, ElementFormat fmt,
                    const uint8_t* a, const uint8_t* b, int shared_scale_exp,
                    MacState* grid) {
  const MacMode mode = mode_for_format(fmt);
  if (mode == MacMode::Fp8Fp6) {
    block_mac_scalar(variant, fmt, a, b, shared_scale_exp, grid);
    return;
  }
  const int e = shared_scale_exp + (mode == MacMode::Int8 ? -12 : -2);
  if (e < -149 || e > 127) {  // 2^e is not an exact FP32 scale
    block_mac_scalar(variant, fmt, a, b, shared_scale_exp, grid);
    return;
  }
  if (mode == MacMode::Int8)
    avx2_int8(a, b, shared_scale_exp, grid);
  else
    avx2_fp4(a, b, shared_scale_exp, grid);
}

}  // namespace mxsim

#endif  // MXSIM_WITH_AVX2
