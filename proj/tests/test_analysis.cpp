#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "regtrack/analysis.hpp"
#include "regtrack/synth.hpp"
#include "support.hpp"

using namespace regtrack;
using regtrack::test::as_results;
using regtrack::test::gt_row;
using regtrack::test::res_row;

namespace {

BoundingBox slot(int k, double h = 100) { return {100.0 * k, 0, 40, h}; }

SequenceData ten_frames() {
  SequenceData s;
  s.info.name = "D";
  s.info.frame_rate = 30;
  s.info.width = 640;
  s.info.height = 480;
  s.info.length = 10;
  s.info.image_dir = "img1";
  s.root = "/data/D";
  for (int f = 1; f <= 10; ++f) {
    s.gt.push_back(gt_row(f, 1, slot(1)));
    s.detections[f] = {{slot(1), 1.0}};
  }
  s.gt.push_back(gt_row(2, 2, slot(2)));
  s.gt.push_back(gt_row(3, 2, slot(2)));
  s.has_gt = true;
  s.has_detections = true;
  return s;
}

}  // namespace

TEST(Bins, EdgesAndLookup) {
  const auto b = make_bins(uniform_edges(10));
  EXPECT_EQ(b.bins(), 10u);
  EXPECT_EQ(b.bin_of(0.0), 0u);
  EXPECT_EQ(b.bin_of(0.1), 1u);
  EXPECT_EQ(b.bin_of(1.0), 9u);
  EXPECT_THROW(b.bin_of(1.01), std::out_of_range);
  EXPECT_THROW(make_bins({0.0, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(make_bins({0.3, 0.1}), std::invalid_argument);
  EXPECT_THROW(make_bins({0.3}), std::invalid_argument);
  const auto h = make_bins(default_height_edges());
  EXPECT_EQ(h.bin_of(1000.0), 5u);
  EXPECT_TRUE(std::isfinite(h.center(5)));
  EXPECT_TRUE(std::isnan(h.ratio(0)));
}

TEST(VisibilityAnalysis, PerfectResults) {
  std::vector<GtEntry> gt;
  for (int f = 1; f <= 10; ++f) {
    gt.push_back(gt_row(f, 1, slot(1), 0.1 * f - 0.05));
  }
  const auto b = visibility_analysis(gt, as_results(gt));
  for (std::size_t i = 0; i < b.bins(); ++i) {
    EXPECT_EQ(b.total[i], 1);
    EXPECT_EQ(b.ratio(i), 1.0);
  }
}

TEST(VisibilityAnalysis, EmptyResults) {
  std::vector<GtEntry> gt;
  for (int f = 1; f <= 10; ++f) {
    gt.push_back(gt_row(f, 1, slot(1), 0.1 * f - 0.05));
  }
  const auto b = visibility_analysis(gt, std::vector<ResultEntry>{});
  for (std::size_t i = 0; i < b.bins(); ++i) {
    EXPECT_EQ(b.ratio(i), 0.0);
  }
}

TEST(VisibilityAnalysis, LowVisibilityNeverTracked) {
  std::vector<GtEntry> gt;
  std::vector<ResultEntry> res;
  for (int f = 1; f <= 20; ++f) {
    const double v = (f - 0.5) / 20.0;
    gt.push_back(gt_row(f, 1, slot(1), v));
    if (v >= 0.5) {
      res.push_back(res_row(f, 1, slot(1)));
    }
  }
  const auto b = visibility_analysis(gt, res);
  for (std::size_t i = 0; i < b.bins(); ++i) {
    EXPECT_EQ(b.ratio(i), i < 5 ? 0.0 : 1.0);
  }
  long total = 0;
  for (long t : b.total) {
    total += t;
  }
  EXPECT_EQ(total, 20);
}

TEST(HeightAnalysis, Examples) {
  std::vector<GtEntry> gt;
  std::vector<ResultEntry> res;
  int f = 1;
  for (double h : {30.0, 40.0, 70.0, 120.0, 170.0, 400.0}) {
    gt.push_back(gt_row(f, 1, slot(1, h), 0.95));
    if (h >= 50) {
      res.push_back(res_row(f, 1, slot(1, h)));
    }
    ++f;
  }
  const auto b = height_analysis(gt, res);
  EXPECT_EQ(b.total[0], 2);
  EXPECT_EQ(b.ratio(0), 0.0);
  EXPECT_EQ(b.ratio(1), 1.0);
  EXPECT_EQ(b.ratio(5), 1.0);
  const auto perfect = height_analysis(gt, as_results(gt));
  for (std::size_t i = 0; i < perfect.bins(); ++i) {
    EXPECT_TRUE(perfect.total[i] == 0 || perfect.ratio(i) == 1.0);
  }
  for (auto& g : gt) {
    g.visibility = 0.5;
  }
  const auto hidden = height_analysis(gt, as_results(gt));
  for (long t : hidden.total) {
    EXPECT_EQ(t, 0);
  }
}

TEST(GapAnalysis, DetectionsEqualGtHaveNoGaps) {
  const auto s = ten_frames();
  EXPECT_TRUE(gap_analysis(s.gt, s.detections, as_results(s.gt)).gaps.empty());
}

TEST(GapAnalysis, SingleGap) {
  std::vector<GtEntry> gt;
  for (int f = 1; f <= 5; ++f) {
    gt.push_back(gt_row(f, 1, slot(1)));
  }
  DetectionsByFrame dets{{1, {{slot(1), 1.0}}}, {5, {{slot(1), 1.0}}}};
  const auto none = gap_analysis(gt, dets, std::vector<ResultEntry>{});
  ASSERT_EQ(none.gaps.size(), 1u);
  EXPECT_EQ(none.gaps[0], (DetectionGap{1, 2, 3, 0}));
  const auto full = gap_analysis(gt, dets, as_results(gt));
  ASSERT_EQ(full.gaps.size(), 1u);
  EXPECT_EQ(full.gaps[0].covered, 3);
  EXPECT_EQ(full.coverage_by_length.at(3), (std::pair<long, long>{3, 3}));
}

TEST(GapAnalysis, UnboundedRunsAreNotGaps) {
  std::vector<GtEntry> gt;
  for (int f = 1; f <= 6; ++f) {
    gt.push_back(gt_row(f, 1, slot(1)));
    gt.push_back(gt_row(f, 2, slot(2)));
  }
  DetectionsByFrame dets{{3, {{slot(1), 1.0}}}, {4, {{slot(1), 1.0}}}};
  EXPECT_TRUE(gap_analysis(gt, dets, std::vector<ResultEntry>{}).gaps.empty());
}

TEST(GapAnalysis, IndependentOfResults) {
  KeyedRng rng(5);
  SynthConfig sc;
  sc.n_tracks = 6;
  sc.n_frames = 40;
  sc.size_min = sc.size_max = 100;
  sc.occlusion_events = {{1, 2, 15, 6}, {3, 4, 25, 3}};
  const auto syn = generate(sc);
  const auto dets = derive_detections(syn.gt, {2.0, 0.05, 0.3, 0.3, 1});
  const auto a = gap_analysis(syn.gt, dets, as_results(syn.gt));
  std::vector<ResultEntry> some;
  for (const auto& g : syn.gt) {
    if (rng.bernoulli(0.5)) {
      some.push_back({g.frame, g.track_id, g.box, 1.0});
    }
  }
  const auto b = gap_analysis(syn.gt, dets, some);
  ASSERT_EQ(a.gaps.size(), b.gaps.size());
  EXPECT_FALSE(a.gaps.empty());
  for (std::size_t i = 0; i < a.gaps.size(); ++i) {
    EXPECT_EQ(a.gaps[i].start_frame, b.gaps[i].start_frame);
    EXPECT_EQ(a.gaps[i].length, b.gaps[i].length);
    EXPECT_EQ(a.gaps[i].covered, a.gaps[i].length);
    EXPECT_LE(b.gaps[i].covered, b.gaps[i].length);
  }
}

TEST(Decimate, IdentityForOne) {
  const auto s = ten_frames();
  EXPECT_EQ(decimate(s, 1), s);
}

TEST(Decimate, KeepsEveryOtherFrame) {
  const auto s = ten_frames();
  const auto d = decimate(s, 2);
  EXPECT_EQ(d.info.length, 5);
  EXPECT_EQ(d.info.frame_rate, 15);
  std::vector<FrameIndex> frames;
  for (const auto& g : d.gt) {
    if (g.track_id == 1) {
      frames.push_back(g.frame);
    }
  }
  EXPECT_EQ(frames, (std::vector<FrameIndex>{1, 2, 3, 4, 5}));
  EXPECT_EQ(d.detections.size(), 5u);
  EXPECT_EQ(*d.image_path(3), std::filesystem::path("/data/D/img1/000005.jpg"));
}

TEST(Decimate, ShortTrackKeepsOnlySurvivingSample) {
  const auto d = decimate(ten_frames(), 2);
  std::vector<GtEntry> two;
  for (const auto& g : d.gt) {
    if (g.track_id == 2) {
      two.push_back(g);
    }
  }
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].frame, 2);
}

TEST(Decimate, ComposesMultiplicatively) {
  SynthConfig sc;
  sc.n_frames = 61;
  const auto syn = generate(sc);
  const auto s = to_sequence_data(syn, derive_detections(syn.gt, {}));
  for (auto [a, b] : {std::pair{2, 3}, std::pair{3, 2}, std::pair{5, 4}}) {
    const auto twice = decimate(decimate(s, a), b);
    const auto once = decimate(s, a * b);
    EXPECT_EQ(twice.gt, once.gt);
    EXPECT_EQ(twice.detections, once.detections);
    EXPECT_EQ(twice.info.length, once.info.length);
    EXPECT_EQ(twice.source_frames, once.source_frames);
  }
  EXPECT_THROW(decimate(s, 0), std::invalid_argument);
}

TEST(FrameRateStudy, RowsFollowFactors) {
  const auto s = ten_frames();
  const std::vector<int> ks{1, 2, 3, 6, 10};
  std::vector<int> lengths;
  const auto rows = frame_rate_study(s, ks, [&](const SequenceData& d) {
    lengths.push_back(d.info.length);
    return evaluate(d.gt, as_results(d.gt));
  });
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(lengths, (std::vector<int>{10, 5, 4, 2, 1}));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].keep_every, ks[i]);
    EXPECT_EQ(rows[i].frames, lengths[i]);
    EXPECT_DOUBLE_EQ(rows[i].frame_rate, 30.0 / ks[i]);
  }
  const std::vector<int> bad{1, 3, 2};
  EXPECT_THROW(frame_rate_study(s, bad, [](const SequenceData&) { return MetricsReport{}; }),
               std::invalid_argument);
  std::ostringstream csv;
  write_frame_rate_csv(rows, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "keep_every,frames,frame_rate,MOTA,IDF1,FP,FN,IDSW");
}

TEST(AnalysisCsv, BinnedHeader) {
  const auto s = ten_frames();
  const auto b = visibility_analysis(s.gt, as_results(s.gt));
  std::ostringstream out;
  const std::vector<std::pair<std::string, std::string>> header{{"kind", "visibility"}};
  write_binned_csv(b, header, out);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("# kind: visibility\n# bin_edges: 0 0.1 0.2", 0), 0u) << text;
  EXPECT_NE(text.find("bin_center,ratio,total,tracked\n0.0500,nan,0,0\n"), std::string::npos)
      << text;
  EXPECT_NE(text.find("0.9500,1.000000,12,12"), std::string::npos) << text;
}
