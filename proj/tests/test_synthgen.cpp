#include <gtest/gtest.h>

#include "neurolip/config.hpp"
#include "neurolip/dataset.hpp"
#include "neurolip/preprocess.hpp"
#include "neurolip/synthgen.hpp"
#include "support.hpp"

using namespace neurolip;

TEST(Synthgen, SampleIsDeterministic) {
  const auto subjects = make_subjects(1, 3);
  for (auto scene : kAllScenes)
    EXPECT_EQ(generate_sample(subjects[2], 7, scene, 99), generate_sample(subjects[2], 7, scene, 99));
  EXPECT_NE(generate_sample(subjects[2], 7, SceneKind::Frontal, 99),
            generate_sample(subjects[2], 7, SceneKind::Frontal, 100));
}

TEST(Synthgen, SampleShape) {
  const auto s = generate_sample(make_subjects(1, 1)[0], 3, SceneKind::Frontal, 5);
  EXPECT_EQ(s.geometry(), kDvSpeakerGeometry);
  EXPECT_LT(s.events().back().t, 3'000'000u);
  EXPECT_GT(s.size(), 500u);
}

TEST(Synthgen, LowlightKeepsAboutAThirdPlusNoise) {
  const auto subjects = make_subjects(2, 10);
  double frontal = 0, lowlight_true = 0;
  for (int i = 0; i < 20; ++i) {
    const auto& subj = subjects[i % 10];
    const auto f = generate_sample(subj, i % 10, SceneKind::Frontal, 1000 + i);
    SampleStats st;
    const auto l = generate_sample(subj, i % 10, SceneKind::Lowlight, 1000 + i, {}, &st);
    EXPECT_EQ(st.injected_noise, 6000u);
    frontal += double(f.size());
    lowlight_true += double(l.size()) - double(st.injected_noise);
  }
  EXPECT_NEAR(lowlight_true / frontal, 0.35, 0.35 * 0.05);
}

TEST(Synthgen, BothPolaritiesPresent) {
  const auto subjects = make_subjects(3, 10);
  for (int i = 0; i < 40; ++i) {
    const auto s = generate_sample(subjects[i % 10], i % 10, kAllScenes[i % 4], 500 + i);
    bool pos = false, neg = false;
    for (const Event& e : s.events()) (e.p > 0 ? pos : neg) = true;
    EXPECT_TRUE(pos && neg) << "sample " << i;
  }
}

TEST(Synthgen, ScenesPreserveLabels) {
  const auto subj = make_subjects(4, 2)[1];
  for (auto scene : kAllScenes) {
    const auto s = generate_sample(subj, 4, scene, 8);
    ASSERT_TRUE(s.meta().has_value());
    EXPECT_EQ(s.meta()->subject, 1);
    EXPECT_EQ(s.meta()->digit, 4);
    EXPECT_EQ(s.meta()->scene, scene_tag(scene));
  }
}

TEST(Synthgen, SubjectsRespectRangesAndMargin) {
  const auto subjects = make_subjects(0, 10);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto a = subjects[i].normalized();
    for (double v : a) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    for (std::size_t j = 0; j < i; ++j) {
      const auto b = subjects[j].normalized();
      double m = 0;
      for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
      EXPECT_GE(m, SubjectRanges::min_margin);
    }
  }
}

TEST(Synthgen, SceneNamesParse) {
  EXPECT_EQ(parse_scene("SI-45"), SceneKind::View45);
  EXPECT_EQ(parse_scene("lowlight"), SceneKind::Lowlight);
  EXPECT_THROW(parse_scene("side"), ConfigError);
}

TEST(Synthgen, DefaultDatasetCountsAndManifest) {
  DatasetSpec spec;
  spec.scenes = {SceneKind::Frontal};
  const auto data = generate_dataset(spec);
  ASSERT_EQ(data.streams.size(), 400u);
  std::map<std::pair<int, int>, int> cells;
  for (const auto& e : data.manifest) ++cells[{e.meta.subject, e.meta.digit}];
  EXPECT_EQ(cells.size(), 100u);
  for (const auto& [k, n] : cells) EXPECT_EQ(n, 4);

  const auto dir = oracle::scratch_dir("synth_manifest");
  DatasetSpec small = spec;
  small.subjects = 2;
  small.per_scene = 3;
  const auto manifest = write_dataset(generate_dataset(small), dir);
  const Dataset loaded = load_dataset(manifest);
  EXPECT_EQ(loaded.size(), 6u);
  EXPECT_EQ(loaded.streams[0], generate_dataset(small).streams[0]);
}

TEST(Synthgen, SeedsGiveDifferentPayloads) {
  DatasetSpec a;
  a.subjects = 2;
  a.per_scene = 2;
  a.scenes = {SceneKind::Frontal};
  DatasetSpec b = a;
  b.seed = 1;
  const auto da = generate_dataset(a), db = generate_dataset(b);
  auto digest = [](const EventStream& s) {
    const auto bytes = encode_evb(s);
    return git_blob_sha1(std::string(bytes.begin(), bytes.end()));
  };
  for (std::size_t i = 0; i < da.streams.size(); ++i) EXPECT_NE(digest(da.streams[i]), digest(db.streams[i]));
}

TEST(Synthgen, NearestCentroidSeparatesSubjects) {
  DatasetSpec spec;
  spec.scenes = {SceneKind::Frontal};
  const auto data = generate_dataset(spec);
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (std::size_t i = 0; i < data.streams.size(); ++i) {
    const auto v = oracle::histogram_voxels(downscale(data.streams[i], 4), 16);
    const int rep = static_cast<int>(i % 40) / 10;
    (rep < 3 ? train_x : test_x).push_back(v.vec());
    (rep < 3 ? train_y : test_y).push_back(data.manifest[i].meta.subject);
  }
  ASSERT_EQ(test_x.size(), 100u);
  EXPECT_GT(oracle::nearest_centroid_accuracy(train_x, train_y, test_x, test_y), 0.5);
}
