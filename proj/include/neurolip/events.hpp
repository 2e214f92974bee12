#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neurolip {

struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  std::uint32_t width = 200;
  std::uint32_t height = 160;

  bool contains(std::int64_t x, std::int64_t y) const noexcept {
    return x >= 0 && y >= 0 && x < static_cast<std::int64_t>(width) && y < static_cast<std::int64_t>(height);
  }
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

inline constexpr SensorGeometry kDvSpeakerGeometry{200, 160};

struct SampleMeta {
  int subject = 0;
  int digit = 0;
  std::string scene;
  std::uint64_t duration_us = 0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// Recognized scene tags: the four recording conditions and their synthetic proxies.
bool is_known_scene(std::string_view scene);

class EventStream {
 public:
  EventStream() = default;

  /// Validates bounds/polarity and stable-sorts by timestamp.
  EventStream(std::vector<Event> events, SensorGeometry geometry, std::optional<SampleMeta> meta = std::nullopt);

  const std::vector<Event>& events() const noexcept { return events_; }
  const SensorGeometry& geometry() const noexcept { return geometry_; }
  const std::optional<SampleMeta>& meta() const noexcept { return meta_; }
  void set_meta(std::optional<SampleMeta> meta) { meta_ = std::move(meta); }

  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  std::vector<Event> events_;
  SensorGeometry geometry_{};
  std::optional<SampleMeta> meta_;
};

/// Maps timestamps linearly onto [0, 1]. A stream whose first and last
/// timestamps coincide maps every event to 0. Throws EmptyStreamError.
std::vector<double> normalize_time(const EventStream& stream);

/// Keeps events inside the window [x0, x0+w) x [y0, y0+h), re-origined to (0, 0).
EventStream crop_roi(const EventStream& stream, std::uint32_t x0, std::uint32_t y0, std::uint32_t w, std::uint32_t h);

enum class StreamFormat { Evb, Csv };

StreamFormat format_from_path(const std::filesystem::path& path);

void save_stream(const EventStream& stream, const std::filesystem::path& path, StreamFormat format);
void save_stream(const EventStream& stream, const std::filesystem::path& path);

/// CSV input carries no geometry, so callers pass it; EVB files store their own
/// and `geometry` is ignored for them.
EventStream load_stream(const std::filesystem::path& path, StreamFormat format,
                        SensorGeometry geometry = kDvSpeakerGeometry);
EventStream load_stream(const std::filesystem::path& path, SensorGeometry geometry = kDvSpeakerGeometry);

std::vector<std::uint8_t> encode_evb(const EventStream& stream);
EventStream decode_evb(const std::vector<std::uint8_t>& bytes);
std::string encode_csv(const EventStream& stream);
EventStream decode_csv(std::string_view text, SensorGeometry geometry);

// Dataset manifest: one JSON object per line.
struct ManifestEntry {
  std::string file;  // relative to the manifest's directory unless absolute
  SampleMeta meta;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::string manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(std::string_view line, std::size_t index);

}  // namespace neurolip
