#pragma once

#include <cstdint>

#include "neurolip/events.hpp"
#include "neurolip/rng.hpp"

namespace neurolip {

struct DenoiseConfig {
  std::uint64_t tf_us = 10'000;
};

struct AugmentConfig {
  int max_shift = 20;
  double mirror_prob = 0.5;
  double sparsify_prob = 0.30;
  double drop_ratio_lo = 0.4;
  double drop_ratio_hi = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keeps an event iff some other event of the input lies on a 4-connected
/// neighbouring pixel strictly less than `tf_us` away in time. Polarity is
/// ignored. Runs in O(N log N) using a per-pixel time index.
EventStream denoise(const EventStream& stream, const DenoiseConfig& cfg = {});

/// Shifts every event by (dx, dy); events leaving the sensor are dropped.
EventStream translate(const EventStream& stream, int dx, int dy);

/// Horizontal flip x -> W-1-x when u < threshold (0.5 by default).
EventStream mirror(const EventStream& stream, double u, double threshold = 0.5);

/// Uniformly keeps floor(N * (1 - r)) events without replacement, in time order.
EventStream sparsify(const EventStream& stream, double r, Rng& rng);

/// translation -> mirroring -> sparsification (the latter with probability
/// cfg.sparsify_prob). Training-time only.
EventStream augment(const EventStream& stream, const AugmentConfig& cfg, Rng& rng);

/// Per-sample augmentation RNG so batches can be built in any order.
Rng augment_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample_index);

/// Integer-divides coordinates by `factor`, shrinking the geometry to
/// ceil(W/factor) x ceil(H/factor). factor == 1 is the identity.
EventStream downscale(const EventStream& stream, std::uint32_t factor);

}  // namespace neurolip
