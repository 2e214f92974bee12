#include "neurolip/preprocess.hpp"

#include <algorithm>
#include <numeric>

#include "neurolip/error.hpp"

namespace neurolip {

void AugmentConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (max_shift < 0) throw ConfigError("augment.max_shift must be >= 0");
  if (!prob(mirror_prob) || !prob(sparsify_prob)) throw ConfigError("augment probabilities must lie in [0, 1]");
  if (!(drop_ratio_lo >= 0.0 && drop_ratio_lo <= drop_ratio_hi && drop_ratio_hi < 1.0))
    throw ConfigError("augment drop ratio range must satisfy 0 <= lo <= hi < 1");
}

EventStream denoise(const EventStream& stream, const DenoiseConfig& cfg) {
  if (cfg.tf_us == 0) throw ConfigError("denoise window must be positive");
  const auto& ev = stream.events();
  const auto& g = stream.geometry();
  const std::size_t npix = std::size_t{g.width} * g.height;

  // CSR index: per-pixel timestamps, ascending because the stream is time-sorted.
  std::vector<std::uint32_t> offset(npix + 1, 0);
  for (const Event& e : ev) ++offset[std::size_t{e.y} * g.width + e.x + 1];
  std::partial_sum(offset.begin(), offset.end(), offset.begin());
  std::vector<std::uint64_t> times(ev.size());
  {
    std::vector<std::uint32_t> cursor(offset.begin(), offset.end() - 1);
    for (const Event& e : ev) times[cursor[std::size_t{e.y} * g.width + e.x]++] = e.t;
  }

  auto has_support = [&](std::int64_t x, std::int64_t y, std::uint64_t t) {
    if (!g.contains(x, y)) return false;
    const std::size_t pix = static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x);
    const auto first = times.begin() + offset[pix];
    const auto last = times.begin() + offset[pix + 1];
    // first neighbour time strictly greater than t - tf
    auto it = t >= cfg.tf_us ? std::upper_bound(first, last, t - cfg.tf_us) : first;
    return it != last && *it < t + cfg.tf_us;
  };

  std::vector<Event> kept;
  kept.reserve(ev.size());
  for (const Event& e : ev) {
    const std::int64_t x = e.x, y = e.y;
    if (has_support(x - 1, y, e.t) || has_support(x + 1, y, e.t) || has_support(x, y - 1, e.t) ||
        has_support(x, y + 1, e.t))
      kept.push_back(e);
  }
  return EventStream(std::move(kept), g, stream.meta());
}

EventStream translate(const EventStream& stream, int dx, int dy) {
  const auto& g = stream.geometry();
  std::vector<Event> out;
  out.reserve(stream.size());
  for (const Event& e : stream.events()) {
    const std::int64_t x = std::int64_t{e.x} + dx;
    const std::int64_t y = std::int64_t{e.y} + dy;
    if (!g.contains(x, y)) continue;
    out.push_back({e.t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), e.p});
  }
  return EventStream(std::move(out), g, stream.meta());
}

EventStream mirror(const EventStream& stream, double u, double threshold) {
  if (!(u < threshold)) return stream;
  const auto& g = stream.geometry();
  std::vector<Event> out;
  out.reserve(stream.size());
  for (const Event& e : stream.events()) {
    const std::int64_t x = std::int64_t{g.width} - 1 - e.x;
    if (!g.contains(x, e.y)) continue;
    out.push_back({e.t, static_cast<std::uint16_t>(x), e.y, e.p});
  }
  return EventStream(std::move(out), g, stream.meta());
}

EventStream sparsify(const EventStream& stream, double r, Rng& rng) {
  const std::size_t n = stream.size();
  const auto target = static_cast<std::size_t>(static_cast<double>(n) * (1.0 - r));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < target; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  std::vector<Event> out;
  out.reserve(target);
  for (std::size_t i : idx) out.push_back(stream.events()[i]);
  return EventStream(std::move(out), stream.geometry(), stream.meta());
}

EventStream augment(const EventStream& stream, const AugmentConfig& cfg, Rng& rng) {
  const int dx = static_cast<int>(uniform_int(rng, -cfg.max_shift, cfg.max_shift));
  const int dy = static_cast<int>(uniform_int(rng, -cfg.max_shift, cfg.max_shift));
  const double u = uniform01(rng);
  const double v = uniform01(rng);
  const double r = cfg.drop_ratio_lo + (cfg.drop_ratio_hi - cfg.drop_ratio_lo) * uniform01(rng);

  EventStream out = translate(stream, dx, dy);
  out = mirror(out, u, cfg.mirror_prob);
  if (v < cfg.sparsify_prob) out = sparsify(out, r, rng);
  return out;
}

Rng augment_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample_index) {
  return Rng(derive_seed(seed, {0xA06ULL, epoch, sample_index}));
}

EventStream downscale(const EventStream& stream, std::uint32_t factor) {
  if (factor == 0) throw ConfigError("downscale factor must be >= 1");
  if (factor == 1) return stream;
  const auto& g = stream.geometry();
  const SensorGeometry out_geom{(g.width + factor - 1) / factor, (g.height + factor - 1) / factor};
  std::vector<Event> out;
  out.reserve(stream.size());
  for (const Event& e : stream.events())
    out.push_back({e.t, static_cast<std::uint16_t>(e.x / factor), static_cast<std::uint16_t>(e.y / factor), e.p});
  return EventStream(std::move(out), out_geom, stream.meta());
}

}  // namespace neurolip
