// Block-MAC kernel tests: every implementation (datapath reference, scalar,
// AVX2 when the machine has it) must produce bit-identical accumulator
// grids and saturation flags for all formats, variants, and shared-scale
// exponents, including the extreme-scale corners where the AVX2 kernel
// falls back to scalar code.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <bit>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mxsim/common.hpp"
#include "mxsim/formats.hpp"
#include "mxsim/kernels.hpp"
#include "mxsim/mac.hpp"

using namespace mxsim;

namespace {

constexpr std::array<ElementFormat, 6> kFormats = {
    ElementFormat::Int8,    ElementFormat::Fp8E5M2, ElementFormat::Fp8E4M3,
    ElementFormat::Fp6E3M2, ElementFormat::Fp6E2M3, ElementFormat::Fp4E2M1};

constexpr std::array<MacVariant, 4> kVariants = {{
    {L2Policy::MantissaAdderExtension, false},
    {L2Policy::MantissaAdderExtension, true},
    {L2Policy::NormalizeInputs, false},
    {L2Policy::NormalizeInputs, true},
}};

std::vector<KernelImpl> fast_impls() {
  std::vector<KernelImpl> impls = {KernelImpl::Scalar};
  if (kernel_available(KernelImpl::Avx2)) impls.push_back(KernelImpl::Avx2);
  return impls;
}

uint8_t random_finite_code(std::mt19937& rng, ElementFormat fmt) {
  const FormatInfo& fi = format_info(fmt);
  std::uniform_int_distribution<int> dist(0, (1 << fi.total_bits) - 1);
  for (;;) {
    uint8_t c = uint8_t(dist(rng));
    if (!is_inf_code(fmt, c) && !is_nan_code(fmt, c)) return c;
  }
}

std::array<uint8_t, kBlockElems> random_block(std::mt19937& rng,
                                              ElementFormat fmt) {
  std::array<uint8_t, kBlockElems> blk{};
  for (uint8_t& c : blk) c = random_finite_code(rng, fmt);
  return blk;
}

void check_grids_equal(const std::array<MacState, kBlockElems>& got,
                       const std::array<MacState, kBlockElems>& want) {
  for (int i = 0; i < kBlockElems; ++i) {
    CAPTURE(i);
    CHECK(std::bit_cast<uint32_t>(got[size_t(i)].accumulator) ==
          std::bit_cast<uint32_t>(want[size_t(i)].accumulator));
    CHECK(got[size_t(i)].saturated == want[size_t(i)].saturated);
  }
}

// Swap the MXSIM_KERNEL variable in and restore the previous value on exit.
struct ScopedEnv {
  std::string name;
  const char* saved;
  ScopedEnv(const char* n, const char* value) : name(n) {
    saved = std::getenv(n);
    if (value)
      setenv(n, value, 1);
    else
      unsetenv(n);
  }
  ~ScopedEnv() {
    if (saved)
      setenv(name.c_str(), saved, 1);
    else
      unsetenv(name.c_str());
  }
};

}  // namespace

TEST_CASE("kernel names round-trip and availability is consistent") {
  for (KernelImpl k :
       {KernelImpl::Datapath, KernelImpl::Scalar, KernelImpl::Avx2}) {
    CHECK(kernel_from_name(kernel_name(k)) == k);
    if (kernel_available(k)) CHECK(kernel_compiled(k));
  }
  CHECK(std::string(kernel_name(KernelImpl::Avx2)) == "avx2");
  CHECK(kernel_compiled(KernelImpl::Datapath));
  CHECK(kernel_available(KernelImpl::Scalar));
  CHECK_THROWS_AS(kernel_from_name("sse2"), std::invalid_argument);
}

TEST_CASE("kernel selection honors the MXSIM_KERNEL override") {
  {
    ScopedEnv env("MXSIM_KERNEL", "scalar");
    CHECK(select_kernel() == KernelImpl::Scalar);
  }
  {
    ScopedEnv env("MXSIM_KERNEL", "datapath");
    CHECK(select_kernel() == KernelImpl::Datapath);
  }
  {
    ScopedEnv env("MXSIM_KERNEL", "avx2");
    if (kernel_available(KernelImpl::Avx2))
      CHECK(select_kernel() == KernelImpl::Avx2);
    else
      CHECK_THROWS_AS(select_kernel(), std::runtime_error);
  }
  {
    ScopedEnv env("MXSIM_KERNEL", "mmx");
    CHECK_THROWS_AS(select_kernel(), std::runtime_error);
  }
  {
    ScopedEnv env("MXSIM_KERNEL", nullptr);
    KernelImpl def = select_kernel();
    CHECK(def == (kernel_available(KernelImpl::Avx2) ? KernelImpl::Avx2
                                                     : KernelImpl::Scalar));
  }
}

TEST_CASE("identity block times identity block is the identity grid") {
  for (ElementFormat fmt : kFormats) {
    CAPTURE(format_info(fmt).name);
    std::array<uint8_t, kBlockElems> ident{};
    for (int i = 0; i < kBlockDim; ++i)
      ident[size_t(i * kBlockDim + i)] = encode_element(fmt, 1.0);
    for (KernelImpl impl :
         {KernelImpl::Datapath, KernelImpl::Scalar, KernelImpl::Avx2}) {
      if (!kernel_available(impl)) continue;
      CAPTURE(kernel_name(impl));
      std::array<MacState, kBlockElems> grid{};
      grid[0].saturated = true;  // sticky diagnostics survive accumulation
      block_mac(impl, MacVariant{}, fmt, ident.data(), ident.data(), 0,
                grid.data());
      for (int i = 0; i < kBlockDim; ++i) {
        for (int j = 0; j < kBlockDim; ++j) {
          CAPTURE(i);
          CAPTURE(j);
          CHECK(grid[size_t(i * kBlockDim + j)].accumulator ==
                (i == j ? 1.0f : 0.0f));
        }
      }
      CHECK(grid[0].saturated);
      CHECK_FALSE(grid[1].saturated);
    }
  }
}

TEST_CASE("fast kernels match the datapath bit for bit on random blocks") {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> se_dist(-40, 40);
  for (ElementFormat fmt : kFormats) {
    for (const MacVariant& variant : kVariants) {
      CAPTURE(format_info(fmt).name);
      CAPTURE(l2_policy_name(variant.policy));
      CAPTURE(variant.bypass_enabled);
      for (int run = 0; run < 8; ++run) {
        // Three successive block accumulations into the same grid so the
        // rounding of later steps depends on earlier kernel output.
        std::array<MacState, kBlockElems> ref{};
        std::vector<std::array<MacState, kBlockElems>> fast(
            fast_impls().size());
        for (int blk = 0; blk < 3; ++blk) {
          auto a = random_block(rng, fmt);
          auto b = random_block(rng, fmt);
          int se = se_dist(rng);
          block_mac_datapath(variant, fmt, a.data(), b.data(), se,
                             ref.data());
          size_t fi = 0;
          for (KernelImpl impl : fast_impls()) {
            block_mac(impl, variant, fmt, a.data(), b.data(), se,
                      fast[fi].data());
            ++fi;
          }
        }
        size_t fi = 0;
        for (KernelImpl impl : fast_impls()) {
          CAPTURE(kernel_name(impl));
          check_grids_equal(fast[fi], ref);
          ++fi;
        }
      }
    }
  }
}

TEST_CASE("extreme shared-scale exponents match the datapath") {
  // Covers the AVX2 exact-scale window boundary (se-12 or se-2 outside
  // [-149,127] falls back to scalar), subnormal products, and saturation.
  constexpr std::array<int, 10> kScales = {-200, -160, -150, -149, -140,
                                           -126, 120,  127,  140,  200};
  std::mt19937 rng(7777);
  for (ElementFormat fmt : kFormats) {
    CAPTURE(format_info(fmt).name);
    for (int se : kScales) {
      CAPTURE(se);
      auto a = random_block(rng, fmt);
      auto b = random_block(rng, fmt);
      std::array<MacState, kBlockElems> ref{};
      block_mac_datapath(MacVariant{}, fmt, a.data(), b.data(), se,
                         ref.data());
      for (KernelImpl impl : fast_impls()) {
        CAPTURE(kernel_name(impl));
        std::array<MacState, kBlockElems> got{};
        block_mac(impl, MacVariant{}, fmt, a.data(), b.data(), se,
                  got.data());
        check_grids_equal(got, ref);
      }
    }
  }
}

TEST_CASE("large positive scales saturate identically to +-FLT_MAX") {
  for (ElementFormat fmt : kFormats) {
    CAPTURE(format_info(fmt).name);
    std::array<uint8_t, kBlockElems> a{}, b{};
    uint8_t big = encode_element(fmt, format_info(fmt).max_finite);
    a.fill(big);
    b.fill(big);
    for (KernelImpl impl :
         {KernelImpl::Datapath, KernelImpl::Scalar, KernelImpl::Avx2}) {
      if (!kernel_available(impl)) continue;
      CAPTURE(kernel_name(impl));
      std::array<MacState, kBlockElems> grid{};
      block_mac(impl, MacVariant{}, fmt, a.data(), b.data(), 200,
                grid.data());
      for (const MacState& s : grid) {
        CHECK(s.saturated);
        CHECK(s.accumulator == FLT_MAX);
      }
    }
  }
}

TEST_CASE("non-finite element codes are rejected by every kernel") {
  std::array<uint8_t, kBlockElems> good{}, bad{};
  bad[17] = 0x7C;  // E5M2 +Inf
  for (KernelImpl impl :
       {KernelImpl::Datapath, KernelImpl::Scalar, KernelImpl::Avx2}) {
    if (!kernel_available(impl)) continue;
    std::array<MacState, kBlockElems> grid{};
    CHECK_THROWS_AS(block_mac(impl, MacVariant{}, ElementFormat::Fp8E5M2,
                              bad.data(), good.data(), 0, grid.data()),
                    contract_error);
    CHECK_THROWS_AS(block_mac(impl, MacVariant{}, ElementFormat::Fp8E5M2,
                              good.data(), bad.data(), 0, grid.data()),
                    contract_error);
    std::array<uint8_t, kBlockElems> nan_blk{};
    nan_blk[63] = 0x7F;  // E4M3 NaN
    CHECK_THROWS_AS(block_mac(impl, MacVariant{}, ElementFormat::Fp8E4M3,
                              nan_blk.data(), good.data(), 0, grid.data()),
                    contract_error);
  }
}
