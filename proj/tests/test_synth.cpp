#include <gtest/gtest.h>

#include <cmath>

#include "regtrack/synth.hpp"
#include "support.hpp"

using namespace regtrack;

namespace {

// Midpoint raster at `step` px: fraction of samples of `box` outside every occluder.
double raster_visible(const BoundingBox& box, const std::vector<BoundingBox>& occ, double step) {
  long in = 0;
  long total = 0;
  for (double y = box.y + step / 2; y < box.bottom(); y += step) {
    for (double x = box.x + step / 2; x < box.right(); x += step) {
      ++total;
      bool hidden = false;
      for (const auto& o : occ) {
        if (x >= o.x && x < o.right() && y >= o.y && y < o.bottom()) {
          hidden = true;
          break;
        }
      }
      in += hidden ? 0 : 1;
    }
  }
  return static_cast<double>(in) / static_cast<double>(total);
}

}  // namespace

TEST(VisibleFraction, Examples) {
  const BoundingBox b{0, 0, 10, 10};
  EXPECT_EQ(visible_fraction(b, {}), 1.0);
  const std::vector<BoundingBox> same{b};
  EXPECT_EQ(visible_fraction(b, same), 0.0);
  const std::vector<BoundingBox> half{{5, -5, 20, 20}};
  EXPECT_DOUBLE_EQ(visible_fraction(b, half), 0.5);
  const std::vector<BoundingBox> overlapping{{0, 0, 6, 10}, {4, 0, 6, 10}};
  EXPECT_EQ(visible_fraction(b, overlapping), 0.0);
  const std::vector<BoundingBox> apart{{20, 20, 5, 5}};
  EXPECT_EQ(visible_fraction(b, apart), 1.0);
}

TEST(VisibleFraction, MatchesRasterOracle) {
  KeyedRng rng(77);
  for (int i = 0; i < 100; ++i) {
    const BoundingBox box{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(20, 60),
                          rng.uniform(20, 60)};
    std::vector<BoundingBox> occ;
    const int n = rng.uniform_int(0, 4);
    for (int k = 0; k < n; ++k) {
      occ.push_back({rng.uniform(0, 80), rng.uniform(0, 80), rng.uniform(5, 50),
                     rng.uniform(5, 50)});
    }
    EXPECT_NEAR(visible_fraction(box, occ), raster_visible(box, occ, 0.25), 0.02) << "case " << i;
  }
}

TEST(Synth, SingleTrackFullyVisible) {
  SynthConfig c;
  c.n_tracks = 1;
  const auto s = generate(c);
  ASSERT_EQ(s.gt.size(), 50u);
  for (const auto& g : s.gt) {
    EXPECT_EQ(g.visibility, 1.0);
    EXPECT_EQ(g.track_id, 1);
    EXPECT_GE(g.box.x, 0);
    EXPECT_LE(g.box.right(), 640);
  }
}

TEST(Synth, VisibilityFollowsDepthOrder) {
  SynthConfig c;
  c.n_tracks = 6;
  c.rng_seed = 9;
  const auto s = generate(c);
  for (const auto& g : s.gt) {
    std::vector<BoundingBox> nearer;
    for (TrackId k = 1; k < g.track_id; ++k) {
      const auto& wb = s.world_boxes.at(k);
      if (auto it = wb.find(g.frame); it != wb.end()) {
        nearer.push_back(it->second);
      }
    }
    EXPECT_NEAR(g.visibility, raster_visible(s.world_boxes.at(g.track_id).at(g.frame), nearer, 1.0),
                0.03);
  }
}

TEST(Synth, Deterministic) {
  SynthConfig c;
  c.rng_seed = 42;
  c.staggered_lifetimes = true;
  c.occlusion_events = {{1, 2, 20, 5}};
  const auto a = generate(c);
  const auto b = generate(c);
  EXPECT_EQ(a.gt, b.gt);
  EXPECT_EQ(a.world_boxes, b.world_boxes);
  c.rng_seed = 43;
  EXPECT_NE(generate(c).gt, a.gt);
}

TEST(Synth, OcclusionEventHidesTrack) {
  SynthConfig c;
  c.n_tracks = 2;
  c.occlusion_events = {{1, 2, 20, 5}};
  c.occlusion_ramp = 4;
  const auto s = generate(c);
  for (FrameIndex t = 20; t < 25; ++t) {
    const auto& a = s.world_boxes.at(1).at(t);
    const auto& b = s.world_boxes.at(2).at(t);
    EXPECT_NEAR(a.center().x, b.center().x, 1e-9);
    EXPECT_NEAR(a.center().y, b.center().y, 1e-9);
  }
  for (const auto& g : s.gt) {
    if (g.track_id == 2 && g.frame >= 20 && g.frame < 25) {
      EXPECT_LT(g.visibility, 1.0);
    }
  }
}

TEST(Synth, MaxPairIouHolds) {
  SynthConfig c;
  c.n_tracks = 6;
  c.max_pair_iou = 0.3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    c.rng_seed = seed;
    const auto s = generate(c);
    for (const auto& [frame, rows] : group_by_frame(s.gt)) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
          EXPECT_LE(iou(s.world_boxes.at(rows[i].track_id).at(frame),
                        s.world_boxes.at(rows[j].track_id).at(frame)),
                    0.3);
        }
      }
    }
  }
}

TEST(Synth, InfeasibleEventsNameTheEvent) {
  SynthConfig c;
  c.n_tracks = 3;
  c.occlusion_events = {{1, 2, 10, 5}, {1, 7, 10, 5}};
  try {
    generate(c);
    FAIL() << "expected InfeasibleConfigError";
  } catch (const InfeasibleConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown track"), std::string::npos) << e.what();
  }
  c.occlusion_events = {{2, 2, 10, 5}};
  EXPECT_THROW(generate(c), InfeasibleConfigError);
  c.occlusion_events = {{1, 2, 48, 5}};
  EXPECT_THROW(generate(c), InfeasibleConfigError);
  c.occlusion_events = {{1, 2, 10, 5}, {2, 3, 12, 5}};
  EXPECT_THROW(generate(c), InfeasibleConfigError);
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.n_frames = 0;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = {};
  c.speed_min = 4;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = {};
  c.size_max = 1000;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = {};
  c.camera_path = {Transform2D::identity()};
  EXPECT_THROW(generate(c), std::invalid_argument);
}

TEST(Synth, ZeroNoiseDetectionsEqualGt) {
  SynthConfig c;
  c.rng_seed = 2;
  const auto s = generate(c);
  const auto dets = derive_detections(s.gt, {});
  std::size_t n = 0;
  for (const auto& [frame, rows] : group_by_frame(s.gt)) {
    const auto& d = dets.at(frame);
    ASSERT_EQ(d.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(d[i].box, rows[i].box);
      EXPECT_EQ(d[i].score, 1.0);
    }
    n += d.size();
  }
  EXPECT_EQ(n, s.gt.size());
}

TEST(Synth, MissVisibilityDropsOccluded) {
  SynthConfig c;
  c.n_tracks = 3;
  c.size_min = c.size_max = 100;
  c.occlusion_events = {{1, 2, 15, 10}};
  const auto s = generate(c);
  NoiseModel nm;
  nm.miss_visibility = 0.3;
  const auto dets = derive_detections(s.gt, nm);
  std::size_t expected = 0;
  for (const auto& g : s.gt) {
    expected += g.visibility >= 0.3;
  }
  std::size_t got = 0;
  for (const auto& [f, d] : dets) {
    got += d.size();
  }
  EXPECT_EQ(got, expected);
  EXPECT_LT(expected, s.gt.size());
}

TEST(Synth, CameraPathComposes) {
  SynthConfig c;
  c.n_tracks = 2;
  c.n_frames = 4;
  c.camera_path.assign(4, Transform2D::translation(2, 1));
  const auto s = generate(c);
  ASSERT_EQ(s.camera.size(), 4u);
  EXPECT_NEAR(s.camera[3].m[2], 8, 1e-12);
  const auto motion = s.camera_motion();
  ASSERT_EQ(motion.size(), 3u);
  EXPECT_NEAR(motion.at(3).m[2], 2, 1e-12);
  EXPECT_NEAR(motion.at(3).m[5], 1, 1e-12);
}

TEST(Synth, IdentityCameraRendersStaticBackground) {
  SynthConfig c;
  c.n_tracks = 1;
  c.n_frames = 3;
  c.frame_w = 120;
  c.frame_h = 90;
  c.size_min = 20;
  c.size_max = 30;
  c.render_images = true;
  c.camera_path.assign(3, Transform2D::identity());
  const auto s = generate(c);
  ASSERT_EQ(s.images.size(), 3u);
  int same = 0;
  int total = 0;
  for (int y = 0; y < 90; ++y) {
    for (int x = 0; x < 120; ++x) {
      ++total;
      same += s.images[0].at(x, y) == s.images[2].at(x, y);
    }
  }
  // Only the moving box differs.
  EXPECT_GT(same, total * 8 / 10);
}

TEST(Synth, RenderTextureWarpConvention) {
  const SmoothTexture tex(3);
  const auto w = Transform2D::translation(5, 2);
  const auto img = render_texture(tex, 64, 48, w);
  EXPECT_NEAR(img.at(20, 10), tex(15, 8), 1e-5);
}

TEST(Synth, WriteAndLoadRoundTrip) {
  test::TempDir dir("synth");
  SynthConfig c;
  c.rng_seed = 5;
  c.n_frames = 12;
  c.name = "SYN-RT";
  c.render_images = true;
  c.frame_w = 96;
  c.frame_h = 80;
  c.size_min = 20;
  c.size_max = 30;
  c.speed_max = 1.0;
  const auto s = generate(c);
  const auto dets = derive_detections(s.gt, {1.5, 0.05, 0.1, 0.2, 9});
  write_sequence(dir.path() / "SYN-RT", s, dets);
  const auto loaded = load_sequence(dir.path() / "SYN-RT");
  const auto mem = to_sequence_data(s, dets);
  EXPECT_EQ(loaded.info, mem.info);
  EXPECT_EQ(loaded.gt, mem.gt);
  EXPECT_EQ(loaded.detections, mem.detections);
  EXPECT_TRUE(loaded.has_gt);
  EXPECT_TRUE(std::filesystem::exists(*loaded.image_path(12)));
  const auto img = load_gray_image(*loaded.image_path(1));
  EXPECT_EQ(img.width(), 96);
}
