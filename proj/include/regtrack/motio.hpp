#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regtrack/core.hpp"
#include "regtrack/track.hpp"

// MOTChallenge text formats: ground truth, detections, tracker results and
// seqinfo.ini metadata. Frames and ids stay 1-based everywhere.

namespace regtrack {

struct GtEntry {
  FrameIndex frame{1};
  TrackId track_id{1};
  BoundingBox box;
  int conf{1};
  int class_id{1};
  double visibility{1.0};

  friend bool operator==(const GtEntry&, const GtEntry&) = default;
};

struct ResultEntry {
  FrameIndex frame{1};
  TrackId track_id{1};
  BoundingBox box;
  double conf{1.0};

  friend bool operator==(const ResultEntry&, const ResultEntry&) = default;
};

struct SequenceInfo {
  std::string name;
  double frame_rate{30.0};
  int width{0};
  int height{0};
  int length{1};
  std::optional<std::string> image_dir;
  std::string image_ext{".jpg"};

  void validate() const;
  friend bool operator==(const SequenceInfo&, const SequenceInfo&) = default;
};

using DetectionsByFrame = std::map<FrameIndex, std::vector<Detection>>;
using GtByFrame = std::map<FrameIndex, std::vector<GtEntry>>;

struct LineError {
  std::size_t line{0};
  std::string message;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A score outside [0, 1] that was clamped while building a Detection.
struct ScoreClamp {
  std::size_t line{0};
  double raw_score{0.0};
};

struct GtParseReport {
  std::vector<GtEntry> entries;
  std::vector<LineError> errors;
};

struct DetectionParseReport {
  DetectionsByFrame frames;
  std::size_t count{0};
  std::vector<LineError> errors;
  std::vector<ScoreClamp> clamped;
};

struct ResultParseReport {
  std::vector<ResultEntry> entries;
  std::vector<LineError> errors;
};

// The *_report variants never stop at a bad line: every non-blank line
// yields either an entry or an error. The plain variants throw ParseError on
// the first bad line.
GtParseReport parse_ground_truth_report(std::istream& in);
std::vector<GtEntry> parse_ground_truth(std::istream& in);

DetectionParseReport parse_detections_report(std::istream& in);
DetectionsByFrame parse_detections(std::istream& in);

ResultParseReport parse_results_report(std::istream& in);
std::vector<ResultEntry> parse_results(std::istream& in);

/// `frame,id,x,y,w,h,conf,-1,-1,-1` sorted by (frame, id), two decimals.
void write_results(std::span<const ResultEntry> results, std::ostream& out);
void write_results(std::span<const Track> tracks, std::ostream& out);
std::vector<ResultEntry> results_from_tracks(std::span<const Track> tracks);

/// Shortest round-trip number formatting, so files re-parse exactly.
void write_ground_truth(std::span<const GtEntry> gt, std::ostream& out);
void write_detections(const DetectionsByFrame& dets, std::ostream& out);

SequenceInfo parse_sequence_info(std::istream& in);
void write_sequence_info(const SequenceInfo& info, std::ostream& out);

/// Which ground-truth rows take part in evaluation.
struct ConsiderationRule {
  std::set<int> classes{1};
  bool require_conf{true};

  bool considers(const GtEntry& e) const {
    return (!require_conf || e.conf == 1) && classes.contains(e.class_id);
  }
};

std::vector<GtEntry> filter_considered(std::span<const GtEntry> gt,
                                       const ConsiderationRule& rule = {});
GtByFrame group_by_frame(std::span<const GtEntry> gt);

/// Everything the tracker and evaluation need for one sequence.
struct SequenceData {
  SequenceInfo info;
  std::filesystem::path root;
  std::vector<GtEntry> gt;
  DetectionsByFrame detections;
  bool has_gt{false};
  bool has_detections{false};
  /// Original frame number of each frame after decimation; empty means
  /// frames are numbered as on disk.
  std::vector<FrameIndex> source_frames;

  std::optional<std::filesystem::path> image_path(FrameIndex frame) const;
  friend bool operator==(const SequenceData&, const SequenceData&) = default;
};

/// Reads `<dir>/seqinfo.ini` plus `gt/gt.txt` and `det/det.txt` when present.
/// `detections_file` overrides the default detection path.
SequenceData load_sequence(const std::filesystem::path& dir,
                           const std::optional<std::filesystem::path>& detections_file = {});

/// Number formatting shared by the writers; locale independent.
std::string format_fixed(double value, int decimals);
std::string format_shortest(double value);

}  // namespace regtrack
