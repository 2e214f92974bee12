#pragma once

// Random inputs and brute-force reference implementations shared by the unit
// tests and the acceptance suite. Nothing here calls into the code under test
// except for the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "neurolip/events.hpp"
#include "neurolip/rng.hpp"
#include "neurolip/tensor.hpp"

namespace neurolip::oracle {

inline EventStream random_stream(Rng& rng, std::size_t n, SensorGeometry g, std::uint64_t t_span) {
  std::vector<Event> ev(n);
  for (auto& e : ev) {
    e.t = static_cast<std::uint64_t>(uniform_int(rng, 0, static_cast<std::int64_t>(t_span)));
    e.x = static_cast<std::uint16_t>(uniform_int(rng, 0, g.width - 1));
    e.y = static_cast<std::uint16_t>(uniform_int(rng, 0, g.height - 1));
    e.p = uniform01(rng) < 0.5 ? -1 : 1;
  }
  return EventStream(std::move(ev), g);
}

/// All-pairs O(N^2) denoise: keep i iff some j != i sits at Manhattan
/// distance exactly 1 with |t_i - t_j| < tf.
inline EventStream denoise_oracle(const EventStream& s, std::uint64_t tf) {
  const auto& ev = s.events();
  std::vector<Event> kept;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    for (std::size_t j = 0; j < ev.size(); ++j) {
      if (i == j) continue;
      const int d = std::abs(int(ev[i].x) - int(ev[j].x)) + std::abs(int(ev[i].y) - int(ev[j].y));
      const std::uint64_t dt = ev[i].t > ev[j].t ? ev[i].t - ev[j].t : ev[j].t - ev[i].t;
      if (d == 1 && dt < tf) {
        kept.push_back(ev[i]);
        break;
      }
    }
  }
  return EventStream(std::move(kept), s.geometry(), s.meta());
}

/// Hard-binned polarity-split histogram, 1 x 2B x H x W. Bin index from exact
/// integer arithmetic; the last bin is closed on the right. Channel block 0
/// holds negative events, block 1 positive.
inline Tensor<double> histogram_voxels(const EventStream& s, std::size_t bins) {
  const auto& g = s.geometry();
  Tensor<double> v({1, 2 * bins, g.height, g.width});
  if (s.empty()) return v;
  const std::uint64_t t0 = s.events().front().t;
  const std::uint64_t span = s.events().back().t - t0;
  for (const Event& e : s.events()) {
    std::size_t b = span == 0 ? 0 : static_cast<std::size_t>((e.t - t0) * bins / span);
    b = std::min(b, bins - 1);
    v.at(0, (e.p > 0 ? bins : 0) + b, e.y, e.x) += 1.0;
  }
  return v;
}

/// Straightforward l_pcr for one sample: clamp, normalize each polarity plane
/// to unit mass (uniform if massless), then sum |diff| / (2HW).
inline double pcr_oracle(const std::vector<double>& r, const std::vector<double>& ref, std::size_t h, std::size_t w) {
  const std::size_t hw = h * w;
  auto norm = [&](const std::vector<double>& m, std::size_t a) {
    std::vector<double> out(hw);
    double mass = 0;
    for (std::size_t i = 0; i < hw; ++i) mass += std::max(0.0, m[a * hw + i]);
    for (std::size_t i = 0; i < hw; ++i)
      out[i] = mass < 1e-8 ? 1.0 / double(hw) : std::max(0.0, m[a * hw + i]) / mass;
    return out;
  };
  double total = 0;
  for (std::size_t a = 0; a < 2; ++a) {
    const auto x = norm(r, a), y = norm(ref, a);
    for (std::size_t i = 0; i < hw; ++i) total += std::abs(x[i] - y[i]);
  }
  return total / (2.0 * double(hw));
}

/// Nearest class centroid (Euclidean) over flattened feature vectors.
inline double nearest_centroid_accuracy(const std::vector<std::vector<double>>& train_x, const std::vector<int>& train_y,
                                        const std::vector<std::vector<double>>& test_x,
                                        const std::vector<int>& test_y) {
  std::map<int, std::vector<double>> sums;
  std::map<int, int> counts;
  for (std::size_t i = 0; i < train_x.size(); ++i) {
    auto& s = sums[train_y[i]];
    s.resize(train_x[i].size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += train_x[i][k];
    ++counts[train_y[i]];
  }
  for (auto& [c, s] : sums)
    for (auto& v : s) v /= counts[c];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    int best = -1;
    double best_d = INFINITY;
    for (const auto& [c, s] : sums) {
      double d = 0;
      for (std::size_t k = 0; k < s.size(); ++k) d += (s[k] - test_x[i][k]) * (s[k] - test_x[i][k]);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == test_y[i];
  }
  return double(correct) / double(test_x.size());
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("neurolip_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace neurolip::oracle
