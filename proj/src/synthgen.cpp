#include "neurolip/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "neurolip/error.hpp"
#include "neurolip/rng.hpp"

namespace neurolip {

namespace {

struct Pulse {
  double onset_s;
  double duration_s;
  double peak;
};

// Syllable pulses per digit, at articulation rate 1. Fixed so datasets are
// comparable across machines.
constexpr std::array<std::array<Pulse, 2>, 10> kDigitPulses = {{
    {{{0.00, 0.35, 0.60}, {0.40, 0.45, 0.90}}},  // 0
    {{{0.00, 0.55, 0.80}, {0.00, 0.00, 0.00}}},  // 1
    {{{0.00, 0.45, 0.50}, {0.00, 0.00, 0.00}}},  // 2
    {{{0.00, 0.30, 0.40}, {0.30, 0.40, 0.90}}},  // 3
    {{{0.00, 0.50, 0.70}, {0.00, 0.00, 0.00}}},  // 4
    {{{0.00, 0.35, 0.90}, {0.35, 0.30, 0.50}}},  // 5
    {{{0.00, 0.30, 0.60}, {0.35, 0.25, 0.40}}},  // 6
    {{{0.00, 0.30, 0.70}, {0.35, 0.35, 0.60}}},  // 7
    {{{0.00, 0.45, 0.85}, {0.00, 0.00, 0.00}}},  // 8
    {{{0.00, 0.30, 0.90}, {0.30, 0.35, 0.60}}},  // 9
}};

constexpr double kRestGapPx = 2.0;
constexpr double kJawCurvature = 0.02;

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }

SubjectModel draw_subject(Rng& rng, int id) {
  using R = SubjectRanges;
  SubjectModel s;
  s.id = id;
  s.flutter_hz = lerp(R::flutter_lo, R::flutter_hi, uniform01(rng));
  s.amplitude_px = lerp(R::amplitude_lo, R::amplitude_hi, uniform01(rng));
  s.asymmetry = lerp(R::asymmetry_lo, R::asymmetry_hi, uniform01(rng));
  s.chin_offset_px = lerp(R::chin_lo, R::chin_hi, uniform01(rng));
  s.event_rate = lerp(R::rate_lo, R::rate_hi, uniform01(rng));
  s.half_width_px = lerp(R::width_lo, R::width_hi, uniform01(rng));
  s.articulation_rate = lerp(R::artic_lo, R::artic_hi, uniform01(rng));
  return s;
}

double margin(const SubjectModel& a, const SubjectModel& b) {
  const auto na = a.normalized(), nb = b.normalized();
  double m = 0.0;
  for (std::size_t i = 0; i < na.size(); ++i) m = std::max(m, std::abs(na[i] - nb[i]));
  return m;
}

}  // namespace

std::string scene_tag(SceneKind kind) {
  switch (kind) {
    case SceneKind::Frontal: return "frontal";
    case SceneKind::View45: return "view45";
    case SceneKind::View90: return "view90";
    case SceneKind::Lowlight: return "lowlight";
  }
  return "frontal";
}

SceneKind parse_scene(const std::string& tag) {
  if (tag == "frontal" || tag == "SI-0") return SceneKind::Frontal;
  if (tag == "view45" || tag == "SI-45") return SceneKind::View45;
  if (tag == "view90" || tag == "SI-90") return SceneKind::View90;
  if (tag == "lowlight" || tag == "II-0") return SceneKind::Lowlight;
  throw ConfigError("unknown scene kind: " + tag);
}

std::array<double, 7> SubjectModel::normalized() const {
  using R = SubjectRanges;
  auto n = [](double v, double lo, double hi) { return (v - lo) / (hi - lo); };
  return {n(flutter_hz, R::flutter_lo, R::flutter_hi),     n(amplitude_px, R::amplitude_lo, R::amplitude_hi),
          n(asymmetry, R::asymmetry_lo, R::asymmetry_hi),  n(chin_offset_px, R::chin_lo, R::chin_hi),
          n(event_rate, R::rate_lo, R::rate_hi),           n(half_width_px, R::width_lo, R::width_hi),
          n(articulation_rate, R::artic_lo, R::artic_hi)};
}

std::vector<SubjectModel> make_subjects(std::uint64_t seed, int count) {
  std::vector<SubjectModel> out;
  for (int id = 0; id < count; ++id) {
    Rng rng(derive_seed(seed, {0x5B, static_cast<std::uint64_t>(id)}));
    SubjectModel s = draw_subject(rng, id);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const bool ok = std::all_of(out.begin(), out.end(),
                                  [&](const SubjectModel& o) { return margin(s, o) >= SubjectRanges::min_margin; });
      if (ok) break;
      s = draw_subject(rng, id);
    }
    out.push_back(s);
  }
  return out;
}

SceneTransform scene_transform(SceneKind kind, double lowlight_noise_rate) {
  switch (kind) {
    case SceneKind::Frontal: return {kind, 1.0, 0.0, 1.0, 0.0};
    case SceneKind::View45: return {kind, 0.707, 0.15, 1.0, 0.0};
    case SceneKind::View90: return {kind, 0.12, 0.05, 1.0, 0.0};
    case SceneKind::Lowlight: return {kind, 1.0, 0.0, 0.35, lowlight_noise_rate};
  }
  throw ConfigError("unknown scene kind");
}

double digit_template(int digit, double seconds) {
  if (digit < 0 || digit > 9) throw ConfigError("digit must be in 0..9");
  double v = 0.0;
  for (const Pulse& p : kDigitPulses[static_cast<std::size_t>(digit)]) {
    if (p.duration_s <= 0.0) continue;
    const double u = (seconds - p.onset_s) / p.duration_s;
    if (u <= 0.0 || u >= 1.0) continue;
    const double s = std::sin(std::numbers::pi * u);
    v = std::max(v, p.peak * s * s);
  }
  return v;
}

EventStream generate_sample(const SubjectModel& subject, int digit, SceneKind scene, std::uint64_t seed,
                            const SynthConfig& cfg, SampleStats* stats) {
  if (digit < 0 || digit > 9) throw ConfigError("digit must be in 0..9");
  const SceneTransform xf = scene_transform(scene, cfg.lowlight_noise_rate);
  const auto& g = cfg.geometry;
  const double W = g.width, H = g.height;

  // Motion depends only on the sample seed so every scene of a given seed
  // sees the same utterance.
  Rng rng(derive_seed(seed, {0x5A}));
  const double cx = 0.5 * W + lerp(-1.0, 1.0, uniform01(rng));
  const double cy = 0.45 * H + lerp(-1.0, 1.0, uniform01(rng));
  const double amp = subject.amplitude_px * lerp(0.95, 1.05, uniform01(rng));
  const double artic = subject.articulation_rate * lerp(0.95, 1.05, uniform01(rng));
  const double onset_s = lerp(0.3, 0.4, uniform01(rng));
  const double phase = 2.0 * std::numbers::pi * uniform01(rng);
  const double phi = subject.asymmetry;
  const double wm = subject.half_width_px;

  auto aperture = [&](double t_s) {
    const double base = digit_template(digit, (t_s - onset_s) * artic);
    return base * (0.8 + 0.2 * std::cos(2.0 * std::numbers::pi * subject.flutter_hz * t_s + phase));
  };

  struct Raw {
    double t;
    double x;
    double y;
    std::int8_t p;
  };
  std::vector<Raw> raw;

  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - 1.2 * wm)));
  const int x_hi = std::min(static_cast<int>(W) - 1, static_cast<int>(std::ceil(cx + 1.2 * wm)));
  const int columns = x_hi - x_lo + 1;
  std::vector<double> prev_upper(columns), prev_lower(columns), prev_chin(columns);

  auto contours = [&](double o, int x, double& upper, double& lower, double& chin) {
    const double xc = x + 0.5;
    const double d = (xc - cx) / wm;
    const double prof = std::sqrt(std::max(0.0, 1.0 - d * d));
    upper = cy - (kRestGapPx + (1.0 - phi) * amp * o) * prof;
    lower = cy + (kRestGapPx + phi * amp * o) * prof;
    chin = cy + subject.chin_offset_px + 0.8 * phi * amp * o + kJawCurvature * (xc - cx) * (xc - cx);
  };

  // Emits one event per pixel centre strictly passed by a contour moving y0 -> y1.
  auto sweep = [&](double t0_us, double dt_us, double xc, double y0, double y1, std::int8_t p_down) {
    if (y0 == y1) return;
    const double lo = std::min(y0, y1), hi = std::max(y0, y1);
    for (double c = std::ceil(lo - 0.5) + 0.5; c <= hi; c += 1.0) {
      if (c <= lo) continue;
      const double frac = (c - y0) / (y1 - y0);
      raw.push_back({t0_us + frac * dt_us, xc, c, y1 > y0 ? p_down : static_cast<std::int8_t>(-p_down)});
    }
  };

  const double dt = static_cast<double>(cfg.step_us);
  const auto steps = cfg.duration_us / cfg.step_us;
  {
    const double o0 = aperture(0.0);
    for (int i = 0; i < columns; ++i) contours(o0, x_lo + i, prev_upper[i], prev_lower[i], prev_chin[i]);
  }
  for (std::uint64_t s = 1; s < steps; ++s) {
    const double t_prev = static_cast<double>(s - 1) * dt;
    const double o = aperture(static_cast<double>(s) * dt * 1e-6);
    for (int i = 0; i < columns; ++i) {
      const int x = x_lo + i;
      const double xc = x + 0.5;
      double up, lowr, ch;
      contours(o, x, up, lowr, ch);
      const bool has_lips = std::abs(xc - cx) < wm;
      if (has_lips) {
        sweep(t_prev, dt, xc, prev_upper[i], up, +1);    // upper lip moving down closes the mouth
        sweep(t_prev, dt, xc, prev_lower[i], lowr, -1);  // lower lip moving down opens it
      }
      sweep(t_prev, dt, xc, prev_chin[i], ch, -1);
      prev_upper[i] = up;
      prev_lower[i] = lowr;
      prev_chin[i] = ch;
    }
  }
  const std::size_t motion = raw.size();

  const auto background = static_cast<std::size_t>(std::llround(subject.event_rate * cfg.duration_us * 1e-3));
  for (std::size_t i = 0; i < background; ++i) {
    const double t = uniform01(rng) * static_cast<double>(cfg.duration_us);
    const double x = uniform01(rng) * W, y = uniform01(rng) * H;
    raw.push_back({t, x, y, uniform01(rng) < 0.5 ? std::int8_t{-1} : std::int8_t{1}});
  }

  Rng scene_rng(derive_seed(seed, {0x5C, static_cast<std::uint64_t>(scene)}));
  std::vector<Event> events;
  events.reserve(raw.size());
  auto emit = [&](double t, double x, double y, std::int8_t p) {
    const double tx = cx + xf.x_scale * (x - cx) + xf.shear * (y - cy);
    const auto xi = static_cast<std::int64_t>(std::floor(tx));
    const auto yi = static_cast<std::int64_t>(std::floor(y));
    if (!g.contains(xi, yi)) return;
    const auto ti = static_cast<std::uint64_t>(std::clamp(t, 0.0, static_cast<double>(cfg.duration_us - 1)));
    events.push_back({ti, static_cast<std::uint16_t>(xi), static_cast<std::uint16_t>(yi), p});
  };
  for (const Raw& r : raw) {
    if (xf.retain < 1.0 && !(uniform01(scene_rng) < xf.retain)) continue;
    emit(r.t, r.x, r.y, r.p);
  }

  const auto noise = static_cast<std::size_t>(std::llround(xf.noise_rate_per_ms * cfg.duration_us * 1e-3));
  for (std::size_t i = 0; i < noise; ++i) {
    const auto t = static_cast<std::uint64_t>(uniform01(scene_rng) * static_cast<double>(cfg.duration_us));
    const auto x = static_cast<std::uint16_t>(uniform_int(scene_rng, 0, g.width - 1));
    const auto y = static_cast<std::uint16_t>(uniform_int(scene_rng, 0, g.height - 1));
    events.push_back({t, x, y, (i % 2 == 0) ? std::int8_t{1} : std::int8_t{-1}});
  }

  if (stats) *stats = {motion, background, noise};
  return EventStream(std::move(events), g, SampleMeta{subject.id, digit, scene_tag(scene), cfg.duration_us});
}

GeneratedDataset generate_dataset(const DatasetSpec& spec) {
  if (spec.subjects < 1 || spec.per_scene < 1) throw ConfigError("dataset needs at least one subject and sample");
  const auto subjects = make_subjects(spec.seed, spec.subjects);
  GeneratedDataset data;
  for (const auto& subject : subjects)
    for (SceneKind scene : spec.scenes)
      for (int k = 0; k < spec.per_scene; ++k) {
        const int digit = k % 10, rep = k / 10;
        const std::uint64_t seed =
            derive_seed(spec.seed, {static_cast<std::uint64_t>(subject.id), static_cast<std::uint64_t>(digit),
                                    static_cast<std::uint64_t>(scene), static_cast<std::uint64_t>(rep)});
        data.streams.push_back(generate_sample(subject, digit, scene, seed, spec.synth));
        ManifestEntry e;
        e.file = "s" + std::to_string(subject.id) + "_" + scene_tag(scene) + "_d" + std::to_string(digit) + "_r" +
                 std::to_string(rep) + ".evb";
        e.meta = *data.streams.back().meta();
        data.manifest.push_back(std::move(e));
      }
  return data;
}

std::filesystem::path write_dataset(const GeneratedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < data.streams.size(); ++i)
    save_stream(data.streams[i], dir / data.manifest[i].file, StreamFormat::Evb);
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(data.manifest, manifest);
  return manifest;
}

}  // namespace neurolip
