#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "regtrack/metrics.hpp"
#include "regtrack/motio.hpp"

namespace regtrack {

/// Tracked / total counts per bin. Bins are [e_i, e_{i+1}) except the last,
/// which also includes its upper edge.
struct BinnedRatio {
  std::vector<double> bin_edges;
  std::vector<long> tracked;
  std::vector<long> total;

  std::size_t bins() const { return total.size(); }
  /// NaN for an empty bin.
  double ratio(std::size_t bin) const;
  double center(std::size_t bin) const;
  /// Bin of `value`; throws std::out_of_range outside [front, back].
  std::size_t bin_of(double value) const;
};

/// Throws std::invalid_argument unless there are >= 2 strictly increasing
/// edges.
BinnedRatio make_bins(std::vector<double> edges);

/// n uniform bins over [0, 1].
std::vector<double> uniform_edges(int n);
std::vector<double> default_visibility_edges();
/// {0, 50, 100, 150, 200, 250, inf} px.
std::vector<double> default_height_edges();
inline constexpr double kDefaultHeightMinVisibility = 0.9;

/// Considered GT boxes binned by visibility; tracked iff matched by the CLEAR
/// matching of evaluate_detailed.
BinnedRatio visibility_analysis(const EvalDetail& eval, std::vector<double> edges);
BinnedRatio visibility_analysis(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                                std::vector<double> edges = default_visibility_edges(),
                                const EvalOptions& options = {});

/// Like visibility_analysis but binned by box height, over GT boxes with
/// visibility >= min_visibility.
BinnedRatio height_analysis(const EvalDetail& eval, std::vector<double> edges,
                            double min_visibility = kDefaultHeightMinVisibility);
BinnedRatio height_analysis(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                            std::vector<double> edges = default_height_edges(),
                            double min_visibility = kDefaultHeightMinVisibility,
                            const EvalOptions& options = {});

struct DetectionGap {
  TrackId track_id{0};
  FrameIndex start_frame{1};
  int length{1};
  int covered{0};

  friend bool operator==(const DetectionGap&, const DetectionGap&) = default;
};

struct GapReport {
  std::vector<DetectionGap> gaps;
  /// gap length -> (covered frames, total frames)
  std::map<int, std::pair<long, long>> coverage_by_length;
};

/// A gap is a maximal run of frames of a considered GT track without a
/// matching detection (per-frame min-cost matching at IoU >= threshold),
/// with detected frames on both sides. Coverage counts gap frames whose GT
/// box was matched by the evaluation.
GapReport gap_analysis(std::span<const GtEntry> gt, const DetectionsByFrame& detections,
                       std::span<const ResultEntry> results, const EvalOptions& options = {});

/// Keeps frames t = 1 (mod k) and renumbers them 1, 2, ...; frame rate is
/// divided by k and the length becomes ceil(length / k). Images are not
/// copied: source_frames records the original frame of each kept frame.
/// k = 1 returns the input unchanged. Throws std::invalid_argument for k < 1.
SequenceData decimate(const SequenceData& seq, int keep_every);

struct FrameRateRow {
  int keep_every{1};
  int frames{0};
  double frame_rate{0.0};
  MetricsReport report;
};

/// Runs `evaluate_run` on decimate(seq, k) for each k, in the given order.
/// Throws std::invalid_argument unless the ks are strictly increasing and >= 1.
std::vector<FrameRateRow> frame_rate_study(
    const SequenceData& seq, std::span<const int> ks,
    const std::function<MetricsReport(const SequenceData&)>& evaluate_run);
std::vector<int> default_decimation_factors();
/// keep_every,frames,frame_rate,MOTA,IDF1,FP,FN,IDSW rows.
void write_frame_rate_csv(std::span<const FrameRateRow> rows, std::ostream& out);

/// `# key: value` header lines, then bin_center,ratio,total,tracked rows.
void write_binned_csv(const BinnedRatio& bins, std::span<const std::pair<std::string, std::string>>
                                                  header,
                      std::ostream& out);
/// length,gaps,covered,total,ratio rows.
void write_gap_csv(const GapReport& report, std::ostream& out);

}  // namespace regtrack
