#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regtrack/motio.hpp"

// CLEAR MOT counts and identity (IDF1) scores.

namespace regtrack {

struct MetricsReport {
  double mota{0.0};
  double idf1{0.0};
  long fp{0};
  long fn{0};
  long idsw{0};
  long mt{0};
  long ml{0};
  double precision{0.0};
  double recall{0.0};
  long gt_count{0};

  long tp{0};
  long pred_count{0};
  long num_gt_tracks{0};
  long num_pred_tracks{0};
  long idtp{0};
  long idfp{0};
  long idfn{0};

  /// Recomputes the ratio fields from the counts. Ratios with a zero
  /// denominator are NaN, except IDF1 of two empty sets, which is 0.
  void finalize();
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct EvalOptions {
  double iou_threshold{0.5};
  ConsiderationRule rule{};
  /// Predictions matched to ignored GT rows (distractor classes, conf 0) are
  /// removed before evaluation instead of counting as false positives.
  bool drop_ignored_matches{true};
  /// Sequence length; defaults to the last GT frame.
  std::optional<FrameIndex> num_frames;
};

/// Index pairs (gt, pred) into the frame's arrays.
using FrameMatches = std::vector<std::pair<std::size_t, std::size_t>>;

/// One frame of CLEAR matching. Pairs in `previous` (GT id -> predicted id of
/// that object's last match) are kept when both are present and still overlap
/// at IoU >= threshold; the rest is solved by min-cost (1 - IoU) assignment
/// over pairs at or above the threshold.
FrameMatches match_frame(std::span<const GtEntry> gt, std::span<const ResultEntry> pred,
                         const std::map<TrackId, TrackId>& previous, double iou_threshold = 0.5);

struct EvalDetail {
  MetricsReport report;
  /// Considered GT rows, sorted by (frame, id), with their match flag.
  std::vector<GtEntry> gt;
  std::vector<bool> matched;
};

/// Throws std::invalid_argument when a result row lies outside
/// [1, num_frames].
EvalDetail evaluate_detailed(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                             const EvalOptions& options = {});
MetricsReport evaluate(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                       const EvalOptions& options = {});

struct IdentityScores {
  long idtp{0};
  long idfp{0};
  long idfn{0};
  double idf1{0.0};
};

/// Global identity assignment maximising the number of frames in which a
/// matched pair overlaps at IoU >= threshold. Inputs are used as given (no
/// filtering).
IdentityScores identity_scores(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                               double iou_threshold = 0.5);
double idf1(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
            double iou_threshold = 0.5);

/// Sums counts and recomputes ratios.
MetricsReport aggregate(std::span<const MetricsReport> reports);

using NamedReport = std::pair<std::string, MetricsReport>;

/// Aligned table, one row per sequence plus ALL, then a summary line.
void write_metrics_table(std::span<const NamedReport> rows, std::ostream& out);
/// Header `sequence,MOTA,IDF1,MT,ML,FP,FN,IDSW,Prcn,Rcll,GT`, rows, ALL row.
void write_metrics_csv(std::span<const NamedReport> rows, std::ostream& out);

}  // namespace regtrack
