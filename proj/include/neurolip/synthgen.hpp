#pragma once

// Deterministic synthetic lip-motion event generator. A mouth is modelled as
// an upper and a lower lip contour plus a jaw line; the aperture follows a
// digit-specific syllable template shaped by per-subject articulation
// parameters. Pixels emit an event whenever a contour sweeps across their
// centre: opening motion (pixel turns dark) gives -1, closing gives +1.
// Scene transforms mimic the four recording conditions.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurolip/events.hpp"

namespace neurolip {

enum class SceneKind { Frontal, View45, View90, Lowlight };

inline constexpr std::array<SceneKind, 4> kAllScenes = {SceneKind::Frontal, SceneKind::View45, SceneKind::View90,
                                                        SceneKind::Lowlight};

std::string scene_tag(SceneKind kind);
/// Accepts the synthetic tags and the recording-condition names (SI-0, SI-45, SI-90, II-0).
SceneKind parse_scene(const std::string& tag);

struct SubjectModel {
  int id = 0;
  double flutter_hz = 5.0;       // f: lip flutter frequency during articulation
  double amplitude_px = 10.0;    // a: peak aperture
  double asymmetry = 0.5;        // phi: share of the opening carried by the lower lip
  double chin_offset_px = 22.0;  // delta: jaw line distance below the mouth centre
  double event_rate = 0.2;       // rho: background activity, events per ms
  double half_width_px = 24.0;   // mouth half width
  double articulation_rate = 1.0;

  /// Parameters mapped to [0, 1] within their documented ranges.
  std::array<double, 7> normalized() const;
};

struct SubjectRanges {
  static constexpr double flutter_lo = 3.0, flutter_hi = 8.0;
  static constexpr double amplitude_lo = 6.0, amplitude_hi = 16.0;
  static constexpr double asymmetry_lo = 0.25, asymmetry_hi = 0.75;
  static constexpr double chin_lo = 16.0, chin_hi = 30.0;
  static constexpr double rate_lo = 0.1, rate_hi = 0.4;
  static constexpr double width_lo = 16.0, width_hi = 30.0;
  static constexpr double artic_lo = 0.8, artic_hi = 1.25;
  /// Minimum normalized distance (max over parameters) between any two subjects.
  static constexpr double min_margin = 0.3;
};

/// Subjects 0..count-1. Subject i depends only on (seed, i) and the subjects
/// before it (redrawn until it clears the margin against all of them).
std::vector<SubjectModel> make_subjects(std::uint64_t seed, int count);

struct SceneTransform {
  SceneKind kind = SceneKind::Frontal;
  double x_scale = 1.0;
  double shear = 0.0;
  double retain = 1.0;
  double noise_rate_per_ms = 0.0;
};

SceneTransform scene_transform(SceneKind kind, double lowlight_noise_rate = 2.0);

struct SynthConfig {
  SensorGeometry geometry = kDvSpeakerGeometry;
  std::uint64_t duration_us = 3'000'000;
  std::uint64_t step_us = 1'000;
  double lowlight_noise_rate = 2.0;  // events per ms injected in the low-light proxy
};

/// Aperture template for a digit (syllable pulses), value in [0, 1] at time
/// `seconds` after articulation onset, for articulation rate 1.
double digit_template(int digit, double seconds);

struct SampleStats {
  std::size_t motion_events = 0;      // before the scene transform
  std::size_t background_events = 0;  // subject background activity
  std::size_t injected_noise = 0;     // low-light noise
};

EventStream generate_sample(const SubjectModel& subject, int digit, SceneKind scene, std::uint64_t seed,
                            const SynthConfig& cfg = {}, SampleStats* stats = nullptr);

struct DatasetSpec {
  int subjects = 10;
  int per_scene = 40;  // samples per subject per scene, digits assigned round-robin
  std::vector<SceneKind> scenes{kAllScenes.begin(), kAllScenes.end()};
  std::uint64_t seed = 0;
  SynthConfig synth;
};

struct GeneratedDataset {
  std::vector<EventStream> streams;
  std::vector<ManifestEntry> manifest;  // file names are relative, parallel to `streams`
};

GeneratedDataset generate_dataset(const DatasetSpec& spec);

/// Writes one EVB file per sample plus `manifest.jsonl` into `dir`.
std::filesystem::path write_dataset(const GeneratedDataset& data, const std::filesystem::path& dir);

}  // namespace neurolip
