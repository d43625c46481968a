// Copyright (C) 2026 The ficd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "ficd/common.hpp"

namespace ficd {

/// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// What a stream of draws is used for. Part of the stream identity, so
/// draws for different purposes never overlap.
enum class StreamPurpose : std::uint32_t {
  kInit = 0,
  kStep = 1,
  kTimeTravel = 2,
  kAux = 3,
};

/// Packs (timestep, repeat, purpose) into a 32-bit substream id.
std::uint32_t substream_id(int t, int repeat, StreamPurpose purpose);

/// Independent 64-bit seed for a named sub-task of a run seeded with root.
std::uint64_t derive_seed(std::uint64_t root, std::uint32_t tag);

/// A stream of uniform and normal variates fully determined by
/// (seed, lane, substream). Lanes are usually chain indices, so chain c at
/// step t always sees the same noise no matter which thread runs it.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t lane, std::uint32_t substream);

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  std::uint64_t next_u64();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  void fill_normal(Eigen::Ref<Vector> out);
  Vector normal_vector(Eigen::Index n);

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter counter_;
  PhiloxCounter block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ficd
