#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "regtrack/core.hpp"
#include "support.hpp"

using namespace regtrack;
using regtrack::test::random_box;
using regtrack::test::reference_nms;

TEST(Iou, IdenticalBoxes) { EXPECT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0); }

TEST(Iou, DisjointBoxes) { EXPECT_EQ(iou({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0); }

TEST(Iou, HalfShift) { EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0); }

TEST(Iou, TouchingEdgesDoNotOverlap) { EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 10, 10}), 0.0); }

TEST(Iou, ContainedBox) { EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {2, 2, 5, 5}), 25.0 / 100.0); }

TEST(Iou, SymmetricAndSelfExact) {
  KeyedRng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_box(rng);
    const auto b = random_box(rng);
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_EQ(iou(a, a), 1.0);
    const double v = iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(BoundingBox, Validity) {
  EXPECT_TRUE((BoundingBox{0, 0, 1, 1}.valid()));
  EXPECT_FALSE((BoundingBox{0, 0, 0, 1}.valid()));
  EXPECT_FALSE((BoundingBox{0, 0, 1, -1}.valid()));
  EXPECT_FALSE((BoundingBox{NAN, 0, 1, 1}.valid()));
  EXPECT_FALSE((BoundingBox{0, INFINITY, 1, 1}.valid()));
}

TEST(Nms, SingleItem) {
  const std::vector<BoundingBox> b{{0, 0, 10, 10}};
  const std::vector<double> s{0.3};
  for (double thr : {0.0, 0.5, 1.0}) {
    EXPECT_EQ(nms(b, s, thr), std::vector<std::size_t>{0});
  }
}

TEST(Nms, SuppressesOverlapAboveThreshold) {
  const std::vector<BoundingBox> b{{0, 0, 10, 10}, {1, 0, 10, 10}};
  const std::vector<double> s{0.9, 0.8};
  EXPECT_NEAR(iou(b[0], b[1]), 90.0 / 110.0, 1e-12);
  EXPECT_EQ(nms(b, s, 0.6), std::vector<std::size_t>{0});
  EXPECT_EQ(nms(b, s, 0.9), (std::vector<std::size_t>{0, 1}));
}

TEST(Nms, OrderedByDescendingScore) {
  const std::vector<BoundingBox> b{{0, 0, 10, 10}, {50, 0, 10, 10}, {100, 0, 10, 10}};
  const std::vector<double> s{0.2, 0.9, 0.5};
  EXPECT_EQ(nms(b, s, 0.5), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Nms, TieAtThresholdIsKept) {
  const std::vector<BoundingBox> b{{0, 0, 10, 10}, {5, 0, 10, 10}};
  const std::vector<double> s{0.9, 0.8};
  EXPECT_EQ(nms(b, s, iou(b[0], b[1])), (std::vector<std::size_t>{0, 1}));
}

TEST(Nms, EqualScoresPreferLowerIndex) {
  const std::vector<BoundingBox> b{{1, 0, 10, 10}, {0, 0, 10, 10}};
  const std::vector<double> s{0.5, 0.5};
  EXPECT_EQ(nms(b, s, 0.3), std::vector<std::size_t>{0});
}

TEST(Nms, EmptyInput) {
  EXPECT_TRUE(nms(std::span<const BoundingBox>{}, std::span<const double>{}, 0.5).empty());
}

TEST(Nms, DetectionOverload) {
  const std::vector<Detection> d{{{0, 0, 10, 10}, 0.4}, {{1, 0, 10, 10}, 0.8}};
  EXPECT_EQ(nms(d, 0.6), std::vector<std::size_t>{1});
}

TEST(Nms, ThresholdOneKeepsEverything) {
  KeyedRng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<BoundingBox> b;
    std::vector<double> s;
    for (int i = 0; i < 20; ++i) {
      b.push_back(random_box(rng, 30.0));
      s.push_back(rng.uniform());
    }
    EXPECT_EQ(nms(b, s, 1.0).size(), b.size());
  }
}

TEST(Nms, ThresholdZeroKeepsPairwiseDisjointSet) {
  KeyedRng rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<BoundingBox> b;
    std::vector<double> s;
    for (int i = 0; i < 25; ++i) {
      b.push_back(random_box(rng, 100.0, 2.0, 20.0));
      s.push_back(rng.uniform());
    }
    const auto kept = nms(b, s, 0.0);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        EXPECT_EQ(iou(b[kept[i]], b[kept[j]]), 0.0);
      }
    }
    EXPECT_EQ(kept, reference_nms(b, s, 0.0));
  }
}

TEST(Nms, MatchesReferenceOnRandomInstances) {
  KeyedRng rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 50));
    std::vector<BoundingBox> b;
    std::vector<double> s;
    for (std::size_t i = 0; i < n; ++i) {
      b.push_back(random_box(rng, 80.0, 5.0, 40.0));
      // Coarse scores so that ties occur.
      s.push_back(static_cast<double>(rng.uniform_int(0, 10)) / 10.0);
    }
    const double thr = rng.uniform();
    ASSERT_EQ(nms(b, s, thr), reference_nms(b, s, thr)) << "instance " << rep;
  }
}

TEST(Clip, CornerClip) {
  EXPECT_EQ(clip_to_frame({-5, -5, 20, 20}, 100, 100), (BoundingBox{0, 0, 15, 15}));
}

TEST(Clip, InteriorUnchanged) {
  EXPECT_EQ(clip_to_frame({10, 10, 5, 5}, 100, 100), (BoundingBox{10, 10, 5, 5}));
}

TEST(Clip, FullyOutsideIsEmpty) {
  EXPECT_FALSE(clip_to_frame({200, 200, 10, 10}, 100, 100).has_value());
  EXPECT_FALSE(clip_to_frame({100, 10, 10, 10}, 100, 100).has_value());
}

TEST(WarpBox, IdentityUnchanged) {
  KeyedRng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto b = random_box(rng);
    EXPECT_EQ(warp_box(b, Transform2D::identity()), b);
  }
}

TEST(WarpBox, Translation) {
  EXPECT_EQ(warp_box({0, 0, 10, 10}, Transform2D::translation(5, 3)),
            (BoundingBox{5, 3, 10, 10}));
}

TEST(WarpBox, QuarterTurnAboutOrigin) {
  const auto b = warp_box({0, 0, 10, 20}, Transform2D::rotation(std::numbers::pi / 2));
  EXPECT_NEAR(b.x, -20, 1e-9);
  EXPECT_NEAR(b.y, 0, 1e-9);
  EXPECT_NEAR(b.w, 20, 1e-9);
  EXPECT_NEAR(b.h, 10, 1e-9);
}

TEST(WarpBox, DegenerateTransformThrows) {
  const auto t = Transform2D::affine({0, 0, 5, 0, 0, 5});
  EXPECT_THROW(warp_box({0, 0, 10, 10}, t), InvalidTransformError);
}

TEST(Transform, RotationBlockIsOrthonormal) {
  const auto r = Transform2D::rigid(0.3, 4, -2);
  EXPECT_TRUE(r.valid());
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  Transform2D bad = r;
  bad.m[0] *= 1.01;
  EXPECT_FALSE(bad.valid());
  bad.kind = TransformKind::affine;
  EXPECT_TRUE(bad.valid());
}

TEST(Transform, InverseAndComposition) {
  KeyedRng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto t = Transform2D::rigid(rng.uniform(-1, 1), rng.uniform(-20, 20),
                                      rng.uniform(-20, 20));
    const auto u = Transform2D::affine({1.1, 0.05, 3, -0.02, 0.9, -1});
    const Point2 p{rng.uniform(0, 100), rng.uniform(0, 100)};
    const Point2 back = t.inverse().apply(t.apply(p));
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
    const Point2 a = t.then(u).apply(p);
    const Point2 b = u.apply(t.apply(p));
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
  }
}
