#include "regtrack/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "regtrack/assignment.hpp"

namespace regtrack {

double BinnedRatio::ratio(std::size_t bin) const {
  if (total.at(bin) == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return static_cast<double>(tracked[bin]) / static_cast<double>(total[bin]);
}

double BinnedRatio::center(std::size_t bin) const {
  const double lo = bin_edges.at(bin);
  const double hi = bin_edges.at(bin + 1);
  if (std::isinf(hi)) {
    // Open-ended last bin: report its lower edge plus half the previous width.
    const double prev = bin > 0 ? lo - bin_edges[bin - 1] : 0.0;
    return lo + 0.5 * prev;
  }
  return 0.5 * (lo + hi);
}

std::size_t BinnedRatio::bin_of(double value) const {
  if (!(value >= bin_edges.front() && value <= bin_edges.back())) {
    throw std::out_of_range("value " + std::to_string(value) + " outside bin range");
  }
  const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), value);
  const auto idx = static_cast<std::size_t>(it - bin_edges.begin());
  return std::min(idx, bin_edges.size() - 1) - 1;
}

BinnedRatio make_bins(std::vector<double> edges) {
  if (edges.size() < 2) {
    throw std::invalid_argument("bins need at least two edges");
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i] < edges[i + 1]) || std::isnan(edges[i])) {
      throw std::invalid_argument("bin edges must be strictly increasing");
    }
  }
  BinnedRatio b;
  b.tracked.assign(edges.size() - 1, 0);
  b.total.assign(edges.size() - 1, 0);
  b.bin_edges = std::move(edges);
  return b;
}

std::vector<double> uniform_edges(int n) {
  if (n < 1) {
    throw std::invalid_argument("need at least one bin");
  }
  std::vector<double> e;
  for (int i = 0; i <= n; ++i) {
    e.push_back(static_cast<double>(i) / n);
  }
  return e;
}

std::vector<double> default_visibility_edges() { return uniform_edges(10); }

std::vector<double> default_height_edges() {
  return {0, 50, 100, 150, 200, 250, std::numeric_limits<double>::infinity()};
}

BinnedRatio visibility_analysis(const EvalDetail& eval, std::vector<double> edges) {
  BinnedRatio b = make_bins(std::move(edges));
  for (std::size_t i = 0; i < eval.gt.size(); ++i) {
    const std::size_t bin = b.bin_of(eval.gt[i].visibility);
    ++b.total[bin];
    b.tracked[bin] += eval.matched[i] ? 1 : 0;
  }
  return b;
}

BinnedRatio visibility_analysis(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                                std::vector<double> edges, const EvalOptions& options) {
  auto bins = make_bins(std::move(edges));
  return visibility_analysis(evaluate_detailed(gt, results, options), std::move(bins.bin_edges));
}

BinnedRatio height_analysis(const EvalDetail& eval, std::vector<double> edges,
                            double min_visibility) {
  BinnedRatio b = make_bins(std::move(edges));
  for (std::size_t i = 0; i < eval.gt.size(); ++i) {
    if (eval.gt[i].visibility < min_visibility) {
      continue;
    }
    const std::size_t bin = b.bin_of(eval.gt[i].box.h);
    ++b.total[bin];
    b.tracked[bin] += eval.matched[i] ? 1 : 0;
  }
  return b;
}

BinnedRatio height_analysis(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                            std::vector<double> edges, double min_visibility,
                            const EvalOptions& options) {
  auto bins = make_bins(std::move(edges));
  return height_analysis(evaluate_detailed(gt, results, options), std::move(bins.bin_edges),
                         min_visibility);
}

GapReport gap_analysis(std::span<const GtEntry> gt, const DetectionsByFrame& detections,
                       std::span<const ResultEntry> results, const EvalOptions& options) {
  const EvalDetail eval = evaluate_detailed(gt, results, options);

  // Which considered GT rows have a matching detection in their frame.
  std::vector<bool> detected(eval.gt.size(), false);
  std::size_t begin = 0;
  while (begin < eval.gt.size()) {
    std::size_t end = begin;
    while (end < eval.gt.size() && eval.gt[end].frame == eval.gt[begin].frame) {
      ++end;
    }
    const auto it = detections.find(eval.gt[begin].frame);
    if (it != detections.end() && !it->second.empty()) {
      CostMatrix costs(end - begin, it->second.size(), kForbidden);
      for (std::size_t g = begin; g < end; ++g) {
        for (std::size_t d = 0; d < it->second.size(); ++d) {
          const double v = iou(eval.gt[g].box, it->second[d].box);
          if (v >= options.iou_threshold) {
            costs(g - begin, d) = 1.0 - v;
          }
        }
      }
      for (const auto& m : solve_min_cost(costs)) {
        detected[begin + m.row] = true;
      }
    }
    begin = end;
  }

  std::map<TrackId, std::vector<std::size_t>> by_track;
  for (std::size_t i = 0; i < eval.gt.size(); ++i) {
    by_track[eval.gt[i].track_id].push_back(i);
  }
  GapReport report;
  for (const auto& [id, rows] : by_track) {
    std::size_t k = 0;
    while (k < rows.size()) {
      if (detected[rows[k]]) {
        ++k;
        continue;
      }
      std::size_t run_end = k;
      int covered = 0;
      while (run_end < rows.size() && !detected[rows[run_end]]) {
        covered += eval.matched[rows[run_end]] ? 1 : 0;
        ++run_end;
      }
      if (k > 0 && run_end < rows.size()) {
        const int length = static_cast<int>(run_end - k);
        report.gaps.push_back({id, eval.gt[rows[k]].frame, length, covered});
        auto& bucket = report.coverage_by_length[length];
        bucket.first += covered;
        bucket.second += length;
      }
      k = run_end;
    }
  }
  return report;
}

SequenceData decimate(const SequenceData& seq, int keep_every) {
  if (keep_every < 1) {
    throw std::invalid_argument("decimation factor must be >= 1");
  }
  if (keep_every == 1) {
    return seq;
  }
  const int k = keep_every;
  auto kept = [k](FrameIndex f) { return (f - 1) % k == 0; };
  auto renumber = [k](FrameIndex f) { return (f - 1) / k + 1; };

  SequenceData out;
  out.info = seq.info;
  out.info.frame_rate = seq.info.frame_rate / k;
  out.info.length = (seq.info.length + k - 1) / k;
  out.root = seq.root;
  out.has_gt = seq.has_gt;
  out.has_detections = seq.has_detections;
  for (const auto& e : seq.gt) {
    if (kept(e.frame)) {
      GtEntry r = e;
      r.frame = renumber(e.frame);
      out.gt.push_back(r);
    }
  }
  for (const auto& [f, dets] : seq.detections) {
    if (kept(f)) {
      out.detections[renumber(f)] = dets;
    }
  }
  for (FrameIndex f = 1; f <= out.info.length; ++f) {
    const FrameIndex original = (f - 1) * k + 1;
    out.source_frames.push_back(seq.source_frames.empty()
                                    ? original
                                    : seq.source_frames.at(static_cast<std::size_t>(original) - 1));
  }
  return out;
}

std::vector<int> default_decimation_factors() { return {1, 2, 3, 6, 10}; }

std::vector<FrameRateRow> frame_rate_study(
    const SequenceData& seq, std::span<const int> ks,
    const std::function<MetricsReport(const SequenceData&)>& evaluate_run) {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw std::invalid_argument("decimation factors must be >= 1 and strictly increasing");
    }
  }
  std::vector<FrameRateRow> rows;
  for (int k : ks) {
    const SequenceData d = decimate(seq, k);
    rows.push_back({k, d.info.length, d.info.frame_rate, evaluate_run(d)});
  }
  return rows;
}

namespace {

std::string num(double v, int decimals) {
  return std::isnan(v) ? "nan" : format_fixed(v, decimals);
}

}  // namespace

void write_frame_rate_csv(std::span<const FrameRateRow> rows, std::ostream& out) {
  out << "keep_every,frames,frame_rate,MOTA,IDF1,FP,FN,IDSW\n";
  for (const auto& r : rows) {
    out << r.keep_every << ',' << r.frames << ',' << format_shortest(r.frame_rate) << ','
        << num(r.report.mota, 6) << ',' << num(r.report.idf1, 6) << ',' << r.report.fp << ','
        << r.report.fn << ',' << r.report.idsw << '\n';
  }
}

void write_binned_csv(const BinnedRatio& bins,
                      std::span<const std::pair<std::string, std::string>> header,
                      std::ostream& out) {
  for (const auto& [k, v] : header) {
    out << "# " << k << ": " << v << '\n';
  }
  out << "# bin_edges:";
  for (double e : bins.bin_edges) {
    out << ' ' << (std::isinf(e) ? std::string("inf") : format_shortest(e));
  }
  out << '\n';
  out << "bin_center,ratio,total,tracked\n";
  for (std::size_t i = 0; i < bins.bins(); ++i) {
    out << num(bins.center(i), 4) << ',' << num(bins.ratio(i), 6) << ','
        << bins.total[i] << ',' << bins.tracked[i] << '\n';
  }
}

void write_gap_csv(const GapReport& report, std::ostream& out) {
  out << "length,gaps,covered,total,ratio\n";
  std::map<int, long> counts;
  for (const auto& g : report.gaps) {
    ++counts[g.length];
  }
  for (const auto& [len, cov] : report.coverage_by_length) {
    out << len << ',' << counts[len] << ',' << cov.first << ',' << cov.second << ','
        << num(static_cast<double>(cov.first) / static_cast<double>(cov.second), 6) << '\n';
  }
}

}  // namespace regtrack
