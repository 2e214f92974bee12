#include "neurolip/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "neurolip/error.hpp"

namespace neurolip {

namespace {

constexpr char kEvbMagic[4] = {'E', 'V', 'B', '1'};
constexpr std::size_t kEvbHeaderBytes = 12;
constexpr std::size_t kEvbRecordBytes = 16;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return v;
}

void validate(const std::vector<Event>& events, const SensorGeometry& g) {
  if (g.width < 1 || g.height < 1) throw ParseError(0, "sensor geometry must be at least 1x1");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.p != 1 && e.p != -1) throw ParseError(i, "polarity must be -1 or +1");
    if (!g.contains(e.x, e.y)) throw ParseError(i, "coordinate outside sensor geometry");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename I>
bool parse_int(std::string_view s, I& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

}  // namespace

bool is_known_scene(std::string_view scene) {
  static constexpr std::string_view kScenes[] = {"SI-0", "SI-45", "SI-90", "II-0",
                                                 "frontal", "view45", "view90", "lowlight"};
  return std::find(std::begin(kScenes), std::end(kScenes), scene) != std::end(kScenes);
}

EventStream::EventStream(std::vector<Event> events, SensorGeometry geometry, std::optional<SampleMeta> meta)
    : events_(std::move(events)), geometry_(geometry), meta_(std::move(meta)) {
  validate(events_, geometry_);
  auto by_time = [](const Event& a, const Event& b) { return a.t < b.t; };
  if (!std::is_sorted(events_.begin(), events_.end(), by_time))
    std::stable_sort(events_.begin(), events_.end(), by_time);
}

std::vector<double> normalize_time(const EventStream& stream) {
  if (stream.empty()) throw EmptyStreamError();
  const auto& ev = stream.events();
  const std::uint64_t t0 = ev.front().t;
  const std::uint64_t t1 = ev.back().t;
  std::vector<double> out(ev.size(), 0.0);
  if (t1 == t0) return out;
  const double span = static_cast<double>(t1 - t0);
  for (std::size_t i = 0; i < ev.size(); ++i) out[i] = static_cast<double>(ev[i].t - t0) / span;
  return out;
}

EventStream crop_roi(const EventStream& stream, std::uint32_t x0, std::uint32_t y0, std::uint32_t w,
                     std::uint32_t h) {
  const auto& g = stream.geometry();
  if (w == 0 || h == 0 || std::uint64_t{x0} + w > g.width || std::uint64_t{y0} + h > g.height)
    throw InvalidRoiError("ROI window outside sensor geometry");
  std::vector<Event> out;
  out.reserve(stream.size());
  for (const Event& e : stream.events()) {
    if (e.x < x0 || e.y < y0 || e.x >= x0 + w || e.y >= y0 + h) continue;
    out.push_back({e.t, static_cast<std::uint16_t>(e.x - x0), static_cast<std::uint16_t>(e.y - y0), e.p});
  }
  return EventStream(std::move(out), {w, h}, stream.meta());
}

StreamFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return StreamFormat::Csv;
  if (ext == ".evb") return StreamFormat::Evb;
  throw IoError("cannot infer stream format from extension of " + path.string());
}

std::vector<std::uint8_t> encode_evb(const EventStream& stream) {
  const auto& g = stream.geometry();
  if (g.width > 0xFFFF || g.height > 0xFFFF) throw IoError("geometry does not fit the EVB header");
  std::vector<std::uint8_t> out;
  out.reserve(kEvbHeaderBytes + kEvbRecordBytes * stream.size());
  out.insert(out.end(), std::begin(kEvbMagic), std::end(kEvbMagic));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(g.width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(g.height));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(stream.size()));
  for (const Event& e : stream.events()) {
    put_le<std::uint64_t>(out, e.t);
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    out.push_back(static_cast<std::uint8_t>(e.p));
    out.insert(out.end(), 3, 0);
  }
  return out;
}

EventStream decode_evb(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kEvbHeaderBytes || std::memcmp(bytes.data(), kEvbMagic, 4) != 0)
    throw ParseError(0, "missing EVB1 header");
  const SensorGeometry g{get_le<std::uint16_t>(bytes.data() + 4), get_le<std::uint16_t>(bytes.data() + 6)};
  const std::uint32_t count = get_le<std::uint32_t>(bytes.data() + 8);
  const std::size_t body = bytes.size() - kEvbHeaderBytes;
  if (body / kEvbRecordBytes < count) throw ParseError(body / kEvbRecordBytes, "truncated EVB record");
  if (body != std::size_t{count} * kEvbRecordBytes) throw ParseError(count, "trailing bytes after last EVB record");
  std::vector<Event> events(count);
  const std::uint8_t* p = bytes.data() + kEvbHeaderBytes;
  for (std::uint32_t i = 0; i < count; ++i, p += kEvbRecordBytes) {
    events[i].t = get_le<std::uint64_t>(p);
    events[i].x = get_le<std::uint16_t>(p + 8);
    events[i].y = get_le<std::uint16_t>(p + 10);
    events[i].p = static_cast<std::int8_t>(p[12]);
  }
  return EventStream(std::move(events), g);
}

std::string encode_csv(const EventStream& stream) {
  std::string out = "t,x,y,p\n";
  out.reserve(out.size() + stream.size() * 20);
  for (const Event& e : stream.events()) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += e.p > 0 ? "1" : "-1";
    out += '\n';
  }
  return out;
}

EventStream decode_csv(std::string_view text, SensorGeometry geometry) {
  std::vector<Event> events;
  std::size_t record = 0;
  bool first_line = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const bool header_candidate = first_line;
    first_line = false;

    std::string_view fields[4];
    std::size_t nf = 0;
    std::string_view rest = line;
    while (nf < 4) {
      const auto comma = rest.find(',');
      fields[nf++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) {
        rest = {};
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    std::uint64_t t = 0;
    std::int64_t x = 0, y = 0, p = 0;
    const bool ok = nf == 4 && rest.empty() && parse_int(fields[0], t) && parse_int(fields[1], x) &&
                    parse_int(fields[2], y) && parse_int(fields[3], p);
    if (!ok) {
      if (header_candidate) continue;
      throw ParseError(record, "malformed CSV event line");
    }
    if (p != 1 && p != -1) throw ParseError(record, "polarity must be -1 or +1");
    if (!geometry.contains(x, y)) throw ParseError(record, "coordinate outside sensor geometry");
    events.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)});
    ++record;
  }
  return EventStream(std::move(events), geometry);
}

void save_stream(const EventStream& stream, const std::filesystem::path& path, StreamFormat format) {
  if (format == StreamFormat::Evb) {
    const auto bytes = encode_evb(stream);
    write_file(path, bytes.data(), bytes.size());
  } else {
    const auto text = encode_csv(stream);
    write_file(path, text.data(), text.size());
  }
}

void save_stream(const EventStream& stream, const std::filesystem::path& path) {
  save_stream(stream, path, format_from_path(path));
}

EventStream load_stream(const std::filesystem::path& path, StreamFormat format, SensorGeometry geometry) {
  const auto bytes = read_file(path);
  if (format == StreamFormat::Evb) return decode_evb(bytes);
  return decode_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), geometry);
}

EventStream load_stream(const std::filesystem::path& path, SensorGeometry geometry) {
  return load_stream(path, format_from_path(path), geometry);
}

std::string manifest_line(const ManifestEntry& entry) {
  nlohmann::ordered_json j;
  j["file"] = entry.file;
  j["subject"] = entry.meta.subject;
  j["digit"] = entry.meta.digit;
  j["scene"] = entry.meta.scene;
  j["duration_us"] = entry.meta.duration_us;
  return j.dump();
}

ManifestEntry parse_manifest_line(std::string_view line, std::size_t index) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(index, std::string("manifest line is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(index, "manifest line must be a JSON object");
  ManifestEntry e;
  try {
    e.file = j.at("file").get<std::string>();
    e.meta.subject = j.at("subject").get<int>();
    e.meta.digit = j.at("digit").get<int>();
    e.meta.scene = j.at("scene").get<std::string>();
    e.meta.duration_us = j.at("duration_us").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(index, std::string("manifest field error: ") + ex.what());
  }
  if (e.meta.digit < 0 || e.meta.digit > 9) throw ParseError(index, "digit must be in 0..9");
  if (e.meta.subject < 0) throw ParseError(index, "subject must be non-negative");
  if (!is_known_scene(e.meta.scene)) throw ParseError(index, "unknown scene tag '" + e.meta.scene + "'");
  return e;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_manifest_line(line, index++));
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : entries) {
    text += manifest_line(e);
    text += '\n';
  }
  write_file(path, text.data(), text.size());
}

}  // namespace neurolip
