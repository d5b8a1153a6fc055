#include <gtest/gtest.h>

#include <chrono>
#include <sstream>

#include "regtrack/backends.hpp"
#include "support.hpp"

using namespace regtrack;
using namespace std::chrono_literals;
using regtrack::test::gt_row;

namespace {

std::vector<GtEntry> two_people() {
  return {gt_row(1, 1, {10, 10, 40, 100}, 1.0), gt_row(1, 2, {200, 10, 40, 100}, 0.1),
          gt_row(2, 1, {12, 10, 40, 100}, 1.0), gt_row(2, 2, {198, 10, 40, 100}, 0.1)};
}

class Scripted final : public RegressorClassifier {
 public:
  RegressionOutput out;
  std::vector<Detection> dets;
  std::string identity() const override { return "scripted"; }

 protected:
  RegressionOutput do_reg_and_class(FrameIndex, std::span<const BoundingBox>) override {
    return out;
  }
  std::vector<Detection> do_detect(FrameIndex) override { return dets; }
};

}  // namespace

TEST(GtOracle, ExactMatchZeroNoise) {
  const auto gt = two_people();
  GtOracleBackend b(gt, {});
  const std::vector<BoundingBox> q{{10, 10, 40, 100}};
  const auto r = b.reg_and_class(1, q);
  EXPECT_EQ(r.boxes, q);
  EXPECT_EQ(r.scores, std::vector<double>{1.0});
}

TEST(GtOracle, UnmatchedBoxKeepsInputWithZeroScore) {
  const auto gt = two_people();
  GtOracleBackend b(gt, {});
  const std::vector<BoundingBox> q{{400, 300, 10, 10}};
  const auto r = b.reg_and_class(1, q);
  EXPECT_EQ(r.boxes, q);
  EXPECT_EQ(r.scores, std::vector<double>{0.0});
}

TEST(GtOracle, LowVisibilityScoresZero) {
  const auto gt = two_people();
  NoiseModel n;
  n.miss_visibility = 0.3;
  GtOracleBackend b(gt, n);
  const std::vector<BoundingBox> q{{201, 10, 40, 100}, {11, 10, 40, 100}};
  const auto r = b.reg_and_class(1, q);
  EXPECT_EQ(r.scores, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(b.detect(1).size(), 1u);
}

TEST(GtOracle, RegressesOntoNextFrameBox) {
  const auto gt = two_people();
  GtOracleBackend b(gt, {});
  const std::vector<BoundingBox> q{{10, 10, 40, 100}, {200, 10, 40, 100}};
  const auto r = b.reg_and_class(2, q);
  EXPECT_EQ(r.boxes, (std::vector<BoundingBox>{{12, 10, 40, 100}, {198, 10, 40, 100}}));
}

TEST(GtOracle, MissingFrameScoresZero) {
  const auto gt = two_people();
  GtOracleBackend b(gt, {});
  const std::vector<BoundingBox> q{{10, 10, 40, 100}};
  EXPECT_EQ(b.reg_and_class(9, q).scores, std::vector<double>{0.0});
  EXPECT_TRUE(b.detect(9).empty());
}

TEST(GtOracle, IdempotentWithoutNoise) {
  const auto gt = two_people();
  GtOracleBackend b(gt, {});
  const std::vector<BoundingBox> q{{15, 14, 38, 95}, {195, 12, 44, 98}, {500, 0, 5, 5}};
  const auto once = b.reg_and_class(2, q);
  const auto twice = b.reg_and_class(2, once.boxes);
  EXPECT_EQ(once.boxes, twice.boxes);
  EXPECT_EQ(once.scores, twice.scores);
}

TEST(GtOracle, DeterministicUnderSeed) {
  const auto gt = two_people();
  NoiseModel n{3.0, 0.05, 0.2, 0.0, 42};
  GtOracleBackend a(gt, n);
  GtOracleBackend b(gt, n);
  const std::vector<BoundingBox> q{{15, 14, 38, 95}, {195, 12, 44, 98}};
  const auto ra = a.reg_and_class(2, q);
  // Same query in a different call order on the second instance.
  b.detect(1);
  b.reg_and_class(1, q);
  const auto rb = b.reg_and_class(2, q);
  EXPECT_EQ(ra.boxes, rb.boxes);
  EXPECT_EQ(ra.scores, rb.scores);
  EXPECT_EQ(a.detect(2), b.detect(2));
  NoiseModel other = n;
  other.rng_seed = 43;
  GtOracleBackend c(gt, other);
  EXPECT_NE(c.reg_and_class(2, q).boxes, ra.boxes);
}

TEST(GtOracle, OutputInvariantsUnderNoise) {
  const auto gt = two_people();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GtOracleBackend b(gt, {5.0, 0.3, 0.5, 0.0, seed});
    const std::vector<BoundingBox> q{{15, 14, 38, 95}, {195, 12, 44, 98}, {500, 0, 5, 5}};
    const auto r = b.reg_and_class(2, q);
    ASSERT_EQ(r.boxes.size(), q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      EXPECT_TRUE(r.boxes[i].valid());
      EXPECT_TRUE(r.scores[i] == 0.0 || r.scores[i] == 1.0);
    }
  }
}

TEST(NoiseModel, Validation) {
  EXPECT_THROW((NoiseModel{-1, 0, 0, 0, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((NoiseModel{0, 0, 1.5, 0, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((NoiseModel{0, 0, 0, -0.1, 0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((NoiseModel{1, 0.1, 0.5, 0.3, 9}.validate()));
}

TEST(BackendContract, RejectsArityMismatch) {
  Scripted s;
  s.out = {{{0, 0, 1, 1}}, {0.5, 0.5}};
  const std::vector<BoundingBox> q{{0, 0, 1, 1}};
  EXPECT_THROW(s.reg_and_class(1, q), BackendError);
}

TEST(BackendContract, RejectsScoreOutOfRange) {
  Scripted s;
  s.out = {{{0, 0, 1, 1}}, {1.5}};
  const std::vector<BoundingBox> q{{0, 0, 1, 1}};
  EXPECT_THROW(s.reg_and_class(1, q), BackendError);
  s.dets = {{{0, 0, 1, 1}, -0.1}};
  EXPECT_THROW(s.detect(1), BackendError);
}

TEST(BackendContract, RejectsInvalidBox) {
  Scripted s;
  s.out = {{{0, 0, 0, 1}}, {0.5}};
  const std::vector<BoundingBox> q{{0, 0, 1, 1}};
  EXPECT_THROW(s.reg_and_class(1, q), BackendError);
}

TEST(FileBackend, ReplaysLoggedPair) {
  std::istringstream log(
      "# comment\n"
      "1,10,10,40,100,12,11,40,100,0.9\n"
      "[detections]\n"
      "1,-1,5,5,10,20,0.7\n");
  FileBackend b(log, "test.reglog");
  const std::vector<BoundingBox> q{{10, 10, 40, 100}};
  const auto r = b.reg_and_class(1, q);
  EXPECT_EQ(r.boxes, (std::vector<BoundingBox>{{12, 11, 40, 100}}));
  EXPECT_EQ(r.scores, std::vector<double>{0.9});
  EXPECT_EQ(b.detect(1), (std::vector<Detection>{{{5, 5, 10, 20}, 0.7}}));
  EXPECT_EQ(b.identity(), "file:test.reglog");
}

TEST(FileBackend, MissErrorNamesFrameAndBox) {
  std::istringstream log("1,10,10,40,100,12,11,40,100,0.9\n");
  FileBackend b(log);
  const std::vector<BoundingBox> q{{60, 10, 40, 100}};
  try {
    b.reg_and_class(1, q);
    FAIL();
  } catch (const BackendError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("frame 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("60"), std::string::npos) << msg;
  }
}

TEST(FileBackend, EmptyLogDetectsNothing) {
  std::istringstream log("");
  FileBackend b(log);
  EXPECT_TRUE(b.detect(1).empty());
}

TEST(FileBackend, MalformedLogThrows) {
  std::istringstream log("1,10,10,40,100,12,11\n");
  EXPECT_THROW(FileBackend b(log), BackendError);
}

TEST(RecordingBackend, LogReplaysIdentically) {
  const auto gt = two_people();
  GtOracleBackend inner(gt, {2.0, 0.05, 0.1, 0.0, 3});
  std::ostringstream log;
  RecordingBackend rec(inner, log);
  const std::vector<BoundingBox> q1{{10, 10, 40, 100}, {200, 10, 40, 100}};
  const auto d1 = rec.detect(1);
  const auto r2 = rec.reg_and_class(2, q1);
  const auto d2 = rec.detect(2);

  std::istringstream in(log.str());
  FileBackend replay(in);
  EXPECT_EQ(replay.detect(1), d1);
  const auto p2 = replay.reg_and_class(2, q1);
  EXPECT_EQ(p2.scores, r2.scores);
  for (std::size_t i = 0; i < q1.size(); ++i) {
    EXPECT_NEAR(p2.boxes[i].x, r2.boxes[i].x, 1e-9);
    EXPECT_NEAR(p2.boxes[i].h, r2.boxes[i].h, 1e-9);
  }
  EXPECT_EQ(replay.detect(2).size(), d2.size());
}

TEST(ExternalBackend, EchoProtocol) {
  ExternalBackend b({FAKE_DETECTOR_PATH, "echo"}, 5000ms);
  EXPECT_TRUE(b.reg_and_class(1, std::span<const BoundingBox>{}).boxes.empty());
  const std::vector<BoundingBox> q{{1, 2, 3, 4}, {5, 6, 7, 8}};
  const auto r = b.reg_and_class(2, q);
  EXPECT_EQ(r.boxes, q);
  EXPECT_EQ(r.scores, (std::vector<double>{0.9, 0.9}));
  EXPECT_EQ(b.detect(3), (std::vector<Detection>{{{10, 20, 30, 60}, 0.8}}));
}

TEST(ExternalBackend, ShortScoresIsMalformed) {
  ExternalBackend b({FAKE_DETECTOR_PATH, "short-scores"}, 5000ms);
  const std::vector<BoundingBox> q{{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 9, 9, 9}};
  try {
    b.reg_and_class(1, q);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed"), std::string::npos) << e.what();
    EXPECT_NE(e.payload().find("scores"), std::string::npos);
  }
}

TEST(ExternalBackend, SilentChildTimesOut) {
  ExternalBackend b({FAKE_DETECTOR_PATH, "silent"}, 200ms);
  const auto start = std::chrono::steady_clock::now();
  try {
    b.detect(1);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos) << e.what();
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(ExternalBackend, ChildExitIsReported) {
  ExternalBackend b({FAKE_DETECTOR_PATH, "exit"}, 2000ms);
  EXPECT_THROW(b.detect(1), BackendError);
  EXPECT_THROW(b.detect(2), BackendError);
}

TEST(ExternalBackend, GarbageResponseCarriesPayload) {
  ExternalBackend b({FAKE_DETECTOR_PATH, "garbage"}, 2000ms);
  try {
    b.detect(1);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.payload(), "not json");
  }
}

TEST(ExternalBackend, ShellCommand) {
  ExternalBackend b(shell_command(std::string("exec ") + FAKE_DETECTOR_PATH + " echo"), 5000ms);
  EXPECT_EQ(b.detect(1).size(), 1u);
}
