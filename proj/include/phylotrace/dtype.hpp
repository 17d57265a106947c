// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "phylotrace/error.hpp"

namespace phylotrace {

enum class Dtype { F64, F32, F16, BF16 };

inline std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F64: return 8;
    case Dtype::F32: return 4;
    case Dtype::F16: return 2;
    case Dtype::BF16: return 2;
  }
  return 0;
}

inline std::string_view dtype_name(Dtype d) {
  switch (d) {
    case Dtype::F64: return "F64";
    case Dtype::F32: return "F32";
    case Dtype::F16: return "F16";
    case Dtype::BF16: return "BF16";
  }
  return "?";
}

inline Dtype parse_dtype(std::string_view name) {
  if (name == "F64") return Dtype::F64;
  if (name == "F32") return Dtype::F32;
  if (name == "F16") return Dtype::F16;
  if (name == "BF16") return Dtype::BF16;
  throw Error(ErrorCode::UnknownDtype, "tensor_archive: unsupported dtype \"" + std::string(name) + "\"");
}

/// IEEE 754 binary16 -> double, exact for every representable half value.
inline double decode_f16(std::uint16_t bits) {
  const int sign = bits >> 15;
  const int exponent = (bits >> 10) & 0x1f;
  const int mantissa = bits & 0x3ff;
  double value;
  if (exponent == 0) {
    value = std::ldexp(mantissa, -24);  // subnormal or zero
  } else if (exponent == 31) {
    value = mantissa ? std::numeric_limits<double>::quiet_NaN()
                     : std::numeric_limits<double>::infinity();
  } else {
    value = std::ldexp(1024 + mantissa, exponent - 25);
  }
  return sign ? -value : value;
}

/// bfloat16 is the top half of a binary32; widening is exact by construction.
inline double decode_bf16(std::uint16_t bits) {
  const std::uint32_t as_f32 = static_cast<std::uint32_t>(bits) << 16;
  return static_cast<double>(std::bit_cast<float>(as_f32));
}

}  // namespace phylotrace
