#pragma once

#include <cmath>
#include <cstdint>

#include "reckon/errors.hpp"
#include "reckon/prng.hpp"

namespace reckon {

// Signed two's-complement fixed-point format Q(total_bits, frac_bits).
// total_bits is one of {8, 16, 24, 32}; frac_bits < total_bits.
struct QFormat {
  uint8_t total_bits = 16;
  uint8_t frac_bits = 0;

  constexpr bool valid() const {
    return (total_bits == 8 || total_bits == 16 || total_bits == 24 ||
            total_bits == 32) &&
           frac_bits < total_bits;
  }
  constexpr int64_t max_raw() const {
    return (int64_t{1} << (total_bits - 1)) - 1;
  }
  constexpr int64_t min_raw() const {
    return -(int64_t{1} << (total_bits - 1));
  }
  constexpr double lsb() const {
    return 1.0 / static_cast<double>(int64_t{1} << frac_bits);
  }
  friend constexpr bool operator==(QFormat a, QFormat b) {
    return a.total_bits == b.total_bits && a.frac_bits == b.frac_bits;
  }
};

// Formats used across the datapath.
inline constexpr QFormat kWeightFormat{8, 7};    // synaptic weights, raw in [-127, 127]
inline constexpr QFormat kMembraneFormat{16, 8}; // membrane potentials and readouts
inline constexpr QFormat kTraceFormat{16, 12};   // eligibility traces
inline constexpr QFormat kUpdateFormat{24, 16};  // staged weight updates

inline constexpr int64_t clamp_to(int64_t v, QFormat f) {
  const int64_t lo = f.min_raw(), hi = f.max_raw();
  return v < lo ? lo : (v > hi ? hi : v);
}

// Saturating add on raw lanes; used unboxed in the engine hot loops.
inline constexpr int32_t sat_add_i32(int32_t a, int32_t b, int32_t lo, int32_t hi) {
  const int32_t s = a + b;  // |a|,|b| <= 2^31/2 in all call sites, no UB
  return s < lo ? lo : (s > hi ? hi : s);
}

// A quantized scalar: raw two's-complement integer plus its format.
struct QValue {
  int32_t raw = 0;
  QFormat format{16, 0};

  double to_double() const { return static_cast<double>(raw) * format.lsb(); }

  // Round-to-nearest construction with saturation; config/test convenience,
  // not part of the datapath (which only rescales by the rules below).
  static QValue from_double(double v, QFormat f) {
    const double scaled = v * static_cast<double>(int64_t{1} << f.frac_bits);
    return QValue{static_cast<int32_t>(clamp_to(std::llround(scaled), f)), f};
  }
};

// a + b with saturation; formats must match.
inline QValue q_add_sat(QValue a, QValue b) {
  if (!(a.format == b.format)) {
    throw ContractViolation("q_add_sat: format mismatch");
  }
  const int64_t sum = int64_t{a.raw} + int64_t{b.raw};
  return QValue{static_cast<int32_t>(clamp_to(sum, a.format)), a.format};
}

// Full-precision product rescaled to out_format. Rescaling truncates toward
// -inf (arithmetic shift), then saturates; the one rounding mode used by
// every deterministic rescale in the project.
inline QValue q_mul(QValue a, QValue b, QFormat out_format) {
  const int64_t prod = int64_t{a.raw} * int64_t{b.raw};
  const int prod_frac = a.format.frac_bits + b.format.frac_bits;
  int64_t scaled;
  if (prod_frac >= out_format.frac_bits) {
    scaled = prod >> (prod_frac - out_format.frac_bits);
  } else {
    scaled = prod << (out_format.frac_bits - prod_frac);
  }
  return QValue{static_cast<int32_t>(clamp_to(scaled, out_format)), out_format};
}

// Discards `shift` low bits of `raw`, rounding up with probability equal to
// the discarded fraction. The draw compares the fraction against a uniform
// word of the same width, so the expectation equals the input exactly.
// Values already on the target grid are returned unchanged without
// consuming randomness.
inline int64_t stochastic_round_raw(int64_t raw, int shift, Xorshift32& rng) {
  if (shift <= 0) return raw;
  const int64_t floor_part = raw >> shift;
  const uint64_t mask = (uint64_t{1} << shift) - 1;
  const uint64_t rem = static_cast<uint64_t>(raw) & mask;
  if (rem == 0) return floor_part;
  uint64_t draw;
  if (shift <= 32) {
    draw = rng.next() & mask;
  } else {
    draw = ((uint64_t{rng.next()} << 32) | rng.next()) & mask;
  }
  return floor_part + (draw < rem ? 1 : 0);
}

// Narrows `wide` to `target`, stochastically rounding the discarded
// fraction and saturating to the target range.
inline QValue stochastic_round(QValue wide, QFormat target, Xorshift32& rng) {
  if (wide.format.frac_bits <= target.frac_bits) {
    throw ContractViolation("stochastic_round: target must be coarser");
  }
  const int shift = wide.format.frac_bits - target.frac_bits;
  const int64_t rounded = stochastic_round_raw(wide.raw, shift, rng);
  return QValue{static_cast<int32_t>(clamp_to(rounded, target)), target};
}

}  // namespace reckon
