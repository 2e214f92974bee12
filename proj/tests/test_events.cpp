#include <gtest/gtest.h>

#include <fstream>

#include "neurolip/error.hpp"
#include "neurolip/events.hpp"
#include "support.hpp"

using namespace neurolip;

namespace {

EventStream make(std::vector<Event> ev, SensorGeometry g = kDvSpeakerGeometry) { return EventStream(std::move(ev), g); }

}  // namespace

TEST(NormalizeTime, LinearEndpoints) {
  const auto t = normalize_time(make({{100, 0, 0, 1}, {150, 0, 0, 1}, {200, 0, 0, 1}}));
  EXPECT_EQ(t, (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(NormalizeTime, DegenerateDurationMapsToZero) {
  const auto t = normalize_time(make({{7, 0, 0, 1}, {7, 1, 0, -1}, {7, 2, 0, 1}}));
  EXPECT_EQ(t, (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(NormalizeTime, EmptyStreamThrows) { EXPECT_THROW(normalize_time(EventStream{}), EmptyStreamError); }

TEST(NormalizeTime, RandomStreamSpansUnitIntervalInOrder) {
  Rng rng(3);
  const auto s = oracle::random_stream(rng, 1000, kDvSpeakerGeometry, 3'000'000);
  const auto t = normalize_time(s);
  EXPECT_EQ(*std::min_element(t.begin(), t.end()), 0.0);
  EXPECT_EQ(*std::max_element(t.begin(), t.end()), 1.0);
  EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
}

TEST(EventStream, SortsByTimeAndRejectsBadEvents) {
  const auto s = make({{30, 1, 1, 1}, {10, 2, 2, -1}, {20, 3, 3, 1}});
  EXPECT_EQ(s.events()[0].t, 10u);
  EXPECT_EQ(s.events()[2].t, 30u);
  EXPECT_THROW(make({{0, 200, 0, 1}}), Error);
  EXPECT_THROW(make({{0, 0, 0, 0}}), Error);
}

TEST(CropRoi, CornerReorigins) {
  const auto out = crop_roi(make({{5, 10, 10, 1}}), 10, 10, 5, 5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.events()[0], (Event{5, 0, 0, 1}));
  EXPECT_EQ(out.geometry(), (SensorGeometry{5, 5}));
}

TEST(CropRoi, OutsideWindowDropped) { EXPECT_TRUE(crop_roi(make({{5, 9, 10, 1}}), 10, 10, 5, 5).empty()); }

TEST(CropRoi, FullFrameIsIdentity) {
  Rng rng(4);
  const auto s = oracle::random_stream(rng, 300, kDvSpeakerGeometry, 10'000);
  EXPECT_EQ(crop_roi(s, 0, 0, 200, 160), s);
}

TEST(CropRoi, WindowOutsideSensorThrows) {
  EXPECT_THROW(crop_roi(make({{0, 0, 0, 1}}), 190, 0, 20, 5), InvalidRoiError);
  EXPECT_THROW(crop_roi(make({{0, 0, 0, 1}}), 0, 0, 0, 5), InvalidRoiError);
}

TEST(StreamIo, EvbAndCsvRoundTrip) {
  Rng rng(5);
  const auto s = oracle::random_stream(rng, 500, {64, 48}, 1'000'000);
  EXPECT_EQ(decode_evb(encode_evb(s)), s);
  EXPECT_EQ(decode_csv(encode_csv(s), s.geometry()).events(), s.events());

  const auto dir = oracle::scratch_dir("stream_io");
  save_stream(s, dir / "a.evb");
  save_stream(s, dir / "a.csv");
  EXPECT_EQ(load_stream(dir / "a.evb").events(), s.events());
  EXPECT_EQ(load_stream(dir / "a.csv", s.geometry()).events(), s.events());
}

TEST(StreamIo, CsvFieldOrder) {
  const auto s = decode_csv("1500,3,4,-1\n", kDvSpeakerGeometry);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.events()[0], (Event{1500, 3, 4, -1}));
}

TEST(StreamIo, TruncatedEvbReportsLastRecord) {
  Rng rng(6);
  const auto s = oracle::random_stream(rng, 20, kDvSpeakerGeometry, 1000);
  auto bytes = encode_evb(s);
  bytes.pop_back();
  try {
    decode_evb(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.record(), 19u);
  }
}

TEST(StreamIo, MalformedCsvReportsRecord) {
  try {
    decode_csv("1,2,3,1\n2,2,3,x\n", kDvSpeakerGeometry);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.record(), 1u);
  }
}

TEST(Manifest, LineRoundTripAndErrors) {
  const ManifestEntry e{"s1_frontal_d3_r0.evb", {1, 3, "frontal", 3'000'000}};
  EXPECT_EQ(parse_manifest_line(manifest_line(e), 0), e);
  EXPECT_THROW(parse_manifest_line("{\"file\": 3}", 4), ParseError);
  EXPECT_THROW(parse_manifest_line("not json", 0), ParseError);
}

TEST(Manifest, UnknownSceneRejected) {
  ManifestEntry e{"x.evb", {1, 3, "underwater", 0}};
  EXPECT_THROW(parse_manifest_line(manifest_line(e), 0), ParseError);
}
