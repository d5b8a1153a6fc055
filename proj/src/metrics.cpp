#include "regtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "regtrack/assignment.hpp"

namespace regtrack {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(long num, long den) {
  return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : kNaN;
}

template <typename Row>
std::map<FrameIndex, std::vector<std::size_t>> index_by_frame(std::span<const Row> rows) {
  std::map<FrameIndex, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[rows[i].frame].push_back(i);
  }
  return out;
}

}  // namespace

void MetricsReport::finalize() {
  mota = gt_count > 0 ? 1.0 - static_cast<double>(fp + fn + idsw) / static_cast<double>(gt_count)
                      : kNaN;
  precision = ratio(tp, tp + fp);
  recall = ratio(tp, gt_count);
  const long denom = 2 * idtp + idfp + idfn;
  idf1 = denom > 0 ? 2.0 * static_cast<double>(idtp) / static_cast<double>(denom) : 0.0;
}

FrameMatches match_frame(std::span<const GtEntry> gt, std::span<const ResultEntry> pred,
                         const std::map<TrackId, TrackId>& previous, double iou_threshold) {
  FrameMatches out;
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<bool> pred_used(pred.size(), false);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const auto it = previous.find(gt[g].track_id);
    if (it == previous.end()) {
      continue;
    }
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (!pred_used[p] && pred[p].track_id == it->second &&
          iou(gt[g].box, pred[p].box) >= iou_threshold) {
        out.emplace_back(g, p);
        gt_used[g] = true;
        pred_used[p] = true;
        break;
      }
    }
  }
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_used[g]) {
      rows.push_back(g);
    }
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_used[p]) {
      cols.push_back(p);
    }
  }
  if (!rows.empty() && !cols.empty()) {
    CostMatrix costs(rows.size(), cols.size(), kForbidden);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double v = iou(gt[rows[r]].box, pred[cols[c]].box);
        if (v >= iou_threshold) {
          costs(r, c) = 1.0 - v;
        }
      }
    }
    for (const auto& m : solve_min_cost(costs)) {
      out.emplace_back(rows[m.row], cols[m.col]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

IdentityScores identity_scores(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                               double iou_threshold) {
  std::map<TrackId, std::size_t> gt_index;
  std::map<TrackId, std::size_t> pred_index;
  for (const auto& e : gt) {
    gt_index.emplace(e.track_id, gt_index.size());
  }
  for (const auto& r : results) {
    pred_index.emplace(r.track_id, pred_index.size());
  }
  std::vector<long> overlap(gt_index.size() * pred_index.size(), 0);
  const auto gt_frames = index_by_frame(gt);
  const auto pred_frames = index_by_frame(results);
  for (const auto& [frame, gis] : gt_frames) {
    const auto pit = pred_frames.find(frame);
    if (pit == pred_frames.end()) {
      continue;
    }
    for (std::size_t gi : gis) {
      for (std::size_t pi : pit->second) {
        if (iou(gt[gi].box, results[pi].box) >= iou_threshold) {
          ++overlap[gt_index[gt[gi].track_id] * pred_index.size() +
                    pred_index[results[pi].track_id]];
        }
      }
    }
  }
  IdentityScores s;
  if (!gt_index.empty() && !pred_index.empty()) {
    // All pairs finite: the solver maximizes pair count before cost, which
    // would trade overlap for extra zero-overlap pairs under kForbidden.
    CostMatrix costs(gt_index.size(), pred_index.size(), 0.0);
    for (std::size_t g = 0; g < gt_index.size(); ++g) {
      for (std::size_t p = 0; p < pred_index.size(); ++p) {
        costs(g, p) = -static_cast<double>(overlap[g * pred_index.size() + p]);
      }
    }
    for (const auto& m : solve_min_cost(costs)) {
      s.idtp += overlap[m.row * pred_index.size() + m.col];
    }
  }
  s.idfn = static_cast<long>(gt.size()) - s.idtp;
  s.idfp = static_cast<long>(results.size()) - s.idtp;
  const long denom = static_cast<long>(gt.size() + results.size());
  s.idf1 = denom > 0 ? 2.0 * static_cast<double>(s.idtp) / static_cast<double>(denom) : 0.0;
  return s;
}

double idf1(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
            double iou_threshold) {
  return identity_scores(gt, results, iou_threshold).idf1;
}

EvalDetail evaluate_detailed(std::span<const GtEntry> gt_all, std::span<const ResultEntry> results,
                             const EvalOptions& options) {
  FrameIndex last_frame = 0;
  for (const auto& e : gt_all) {
    last_frame = std::max(last_frame, e.frame);
  }
  if (options.num_frames) {
    last_frame = *options.num_frames;
  }
  for (const auto& r : results) {
    if (r.frame < 1 || r.frame > last_frame) {
      throw std::invalid_argument("result row at frame " + std::to_string(r.frame) +
                                  " lies outside the ground-truth range [1, " +
                                  std::to_string(last_frame) + "]");
    }
  }

  // Drop predictions explained by ignored GT rows.
  std::vector<ResultEntry> preds;
  if (options.drop_ignored_matches) {
    const auto gt_frames = index_by_frame(gt_all);
    const auto pred_frames = index_by_frame(results);
    for (const auto& [frame, pis] : pred_frames) {
      std::vector<bool> drop(pis.size(), false);
      const auto git = gt_frames.find(frame);
      if (git != gt_frames.end()) {
        std::vector<GtEntry> fgt;
        bool any_ignored = false;
        for (std::size_t gi : git->second) {
          fgt.push_back(gt_all[gi]);
          any_ignored = any_ignored || !options.rule.considers(gt_all[gi]);
        }
        if (any_ignored) {
          std::vector<ResultEntry> fp;
          for (std::size_t pi : pis) {
            fp.push_back(results[pi]);
          }
          for (const auto& [g, p] : match_frame(fgt, fp, {}, options.iou_threshold)) {
            if (!options.rule.considers(fgt[g])) {
              drop[p] = true;
            }
          }
        }
      }
      for (std::size_t k = 0; k < pis.size(); ++k) {
        if (!drop[k]) {
          preds.push_back(results[pis[k]]);
        }
      }
    }
  } else {
    preds.assign(results.begin(), results.end());
  }

  EvalDetail detail;
  detail.gt = filter_considered(gt_all, options.rule);
  std::stable_sort(detail.gt.begin(), detail.gt.end(), [](const GtEntry& a, const GtEntry& b) {
    return std::pair(a.frame, a.track_id) < std::pair(b.frame, b.track_id);
  });
  detail.matched.assign(detail.gt.size(), false);
  const auto gt_frames = index_by_frame(std::span<const GtEntry>(detail.gt));
  const auto pred_frames = index_by_frame(std::span<const ResultEntry>(preds));

  MetricsReport& rep = detail.report;
  std::map<TrackId, TrackId> last_match;
  std::map<TrackId, long> track_len;
  std::map<TrackId, long> track_hits;
  std::set<TrackId> pred_ids;
  for (FrameIndex f = 1; f <= last_frame; ++f) {
    std::vector<GtEntry> fgt;
    std::vector<ResultEntry> fpred;
    const auto git = gt_frames.find(f);
    const auto pit = pred_frames.find(f);
    if (git != gt_frames.end()) {
      for (std::size_t gi : git->second) {
        fgt.push_back(detail.gt[gi]);
      }
    }
    if (pit != pred_frames.end()) {
      for (std::size_t pi : pit->second) {
        fpred.push_back(preds[pi]);
        pred_ids.insert(preds[pi].track_id);
      }
    }
    const auto matches = match_frame(fgt, fpred, last_match, options.iou_threshold);
    for (const auto& [g, p] : matches) {
      const TrackId gid = fgt[g].track_id;
      const TrackId pid = fpred[p].track_id;
      const auto it = last_match.find(gid);
      if (it != last_match.end() && it->second != pid) {
        ++rep.idsw;
      }
      last_match[gid] = pid;
      ++track_hits[gid];
      detail.matched[git->second[g]] = true;
    }
    for (const auto& e : fgt) {
      ++track_len[e.track_id];
    }
    rep.tp += static_cast<long>(matches.size());
    rep.fn += static_cast<long>(fgt.size() - matches.size());
    rep.fp += static_cast<long>(fpred.size() - matches.size());
    rep.gt_count += static_cast<long>(fgt.size());
    rep.pred_count += static_cast<long>(fpred.size());
  }
  for (const auto& [id, len] : track_len) {
    const long hits = track_hits[id];
    if (5 * hits >= 4 * len) {
      ++rep.mt;
    } else if (5 * hits <= len) {
      ++rep.ml;
    }
  }
  rep.num_gt_tracks = static_cast<long>(track_len.size());
  rep.num_pred_tracks = static_cast<long>(pred_ids.size());

  const auto ids = identity_scores(detail.gt, preds, options.iou_threshold);
  rep.idtp = ids.idtp;
  rep.idfp = ids.idfp;
  rep.idfn = ids.idfn;
  rep.finalize();
  return detail;
}

MetricsReport evaluate(std::span<const GtEntry> gt, std::span<const ResultEntry> results,
                       const EvalOptions& options) {
  return evaluate_detailed(gt, results, options).report;
}

MetricsReport aggregate(std::span<const MetricsReport> reports) {
  MetricsReport sum;
  for (const auto& r : reports) {
    sum.fp += r.fp;
    sum.fn += r.fn;
    sum.idsw += r.idsw;
    sum.mt += r.mt;
    sum.ml += r.ml;
    sum.gt_count += r.gt_count;
    sum.tp += r.tp;
    sum.pred_count += r.pred_count;
    sum.num_gt_tracks += r.num_gt_tracks;
    sum.num_pred_tracks += r.num_pred_tracks;
    sum.idtp += r.idtp;
    sum.idfp += r.idfp;
    sum.idfn += r.idfn;
  }
  sum.finalize();
  return sum;
}

namespace {

std::string fixed3(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  return format_fixed(v, 3);
}

std::vector<NamedReport> with_total(std::span<const NamedReport> rows) {
  std::vector<NamedReport> all(rows.begin(), rows.end());
  std::vector<MetricsReport> reports;
  for (const auto& r : rows) {
    reports.push_back(r.second);
  }
  all.emplace_back("ALL", aggregate(reports));
  return all;
}

std::vector<std::string> cells(const NamedReport& row) {
  const MetricsReport& r = row.second;
  return {row.first,
          fixed3(r.mota),
          fixed3(r.idf1),
          std::to_string(r.mt),
          std::to_string(r.ml),
          std::to_string(r.fp),
          std::to_string(r.fn),
          std::to_string(r.idsw),
          fixed3(r.precision),
          fixed3(r.recall),
          std::to_string(r.gt_count)};
}

const std::vector<std::string> kHeader = {"sequence", "MOTA", "IDF1", "MT",   "ML", "FP",
                                          "FN",       "IDSW", "Prcn", "Rcll", "GT"};

}  // namespace

void write_metrics_table(std::span<const NamedReport> rows, std::ostream& out) {
  const auto all = with_total(rows);
  std::vector<std::vector<std::string>> table{kHeader};
  for (const auto& r : all) {
    table.push_back(cells(r));
  }
  std::vector<std::size_t> width(kHeader.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  }
  const MetricsReport& t = all.back().second;
  out << "MOTA " << fixed3(t.mota) << "  IDF1 " << fixed3(t.idf1) << "  FP " << t.fp << "  FN "
      << t.fn << "  IDSW " << t.idsw << '\n';
}

void write_metrics_csv(std::span<const NamedReport> rows, std::ostream& out) {
  for (std::size_t c = 0; c < kHeader.size(); ++c) {
    out << (c ? "," : "") << kHeader[c];
  }
  out << '\n';
  for (const auto& r : with_total(rows)) {
    const auto row = cells(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << row[c];
    }
    out << '\n';
  }
}

}  // namespace regtrack
