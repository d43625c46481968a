// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#include "ficd/random.hpp"

#include <cmath>
#include <numbers>

namespace ficd {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
    mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::uint32_t substream_id(int t, int repeat, StreamPurpose purpose) {
  require(t >= 0 && t < (1 << 22), "timestep does not fit a substream id");
  require(repeat >= 0 && repeat < 256, "repeat index does not fit a substream id");
  return (static_cast<std::uint32_t>(t) << 10) | (static_cast<std::uint32_t>(repeat) << 2) |
         static_cast<std::uint32_t>(purpose);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint32_t tag) {
  const PhiloxCounter out = philox4x32({tag, 0xF1CDu, 0, 0}, {static_cast<std::uint32_t>(root),
                                                             static_cast<std::uint32_t>(root >> 32)});
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t lane, std::uint32_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0, substream, static_cast<std::uint32_t>(lane),
               static_cast<std::uint32_t>(lane >> 32)} {}

void NoiseStream::refill() {
  block_ = philox4x32(counter_, key_);
  ++counter_[0];
  used_ = 0;
}

std::uint64_t NoiseStream::next_u64() {
  if (used_ > 2) refill();
  const std::uint64_t hi = block_[used_];
  const std::uint64_t lo = block_[used_ + 1];
  used_ += 2;
  return (hi << 32) | lo;
}

double NoiseStream::uniform() {
  // 53 bits, shifted by half an ulp so neither 0 nor 1 is produced.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t NoiseStream::below(std::uint64_t n) {
  require(n > 0, "range must be non-empty");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double NoiseStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

void NoiseStream::fill_normal(Eigen::Ref<Vector> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
}

Vector NoiseStream::normal_vector(Eigen::Index n) {
  Vector v(n);
  fill_normal(v);
  return v;
}

}  // namespace ficd
