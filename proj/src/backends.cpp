#include "regtrack/backends.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "regtrack/assignment.hpp"
#include "regtrack/rng.hpp"

namespace regtrack {

RegressionOutput RegressorClassifier::reg_and_class(FrameIndex frame,
                                                    std::span<const BoundingBox> boxes) {
  RegressionOutput out = do_reg_and_class(frame, boxes);
  if (out.boxes.size() != boxes.size() || out.scores.size() != boxes.size()) {
    throw BackendError("backend returned " + std::to_string(out.boxes.size()) + " boxes and " +
                       std::to_string(out.scores.size()) + " scores for " +
                       std::to_string(boxes.size()) + " queries");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!(out.scores[i] >= 0.0 && out.scores[i] <= 1.0)) {
      throw BackendError("backend score outside [0,1]: " + std::to_string(out.scores[i]));
    }
    if (!out.boxes[i].valid()) {
      throw BackendError("backend returned invalid box " + to_string(out.boxes[i]));
    }
  }
  return out;
}

std::vector<Detection> RegressorClassifier::detect(FrameIndex frame) {
  auto dets = do_detect(frame);
  for (const auto& d : dets) {
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw BackendError("backend detection score outside [0,1]: " + std::to_string(d.score));
    }
    if (!d.box.valid()) {
      throw BackendError("backend returned invalid detection box " + to_string(d.box));
    }
  }
  return dets;
}

void NoiseModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(center_sigma >= 0.0) || !(scale_sigma >= 0.0)) {
    throw std::invalid_argument("noise sigmas must be non-negative");
  }
  if (!prob(score_flip_prob) || !prob(miss_visibility)) {
    throw std::invalid_argument("noise probabilities must lie in [0,1]");
  }
}

NoisySample sample_noisy(const GtEntry& gt, const NoiseModel& noise, NoiseStream stream,
                         FrameIndex frame) {
  NoisySample s{gt.box, 1.0};
  if (!noise.is_zero()) {
    KeyedRng rng(noise.rng_seed, {static_cast<std::uint64_t>(stream),
                                  static_cast<std::uint64_t>(frame),
                                  static_cast<std::uint64_t>(gt.track_id)});
    const Point2 c = gt.box.center();
    const double dx = rng.gaussian(0.0, noise.center_sigma);
    const double dy = rng.gaussian(0.0, noise.center_sigma);
    const double sw = std::max(0.05, 1.0 + rng.gaussian(0.0, noise.scale_sigma));
    const double sh = std::max(0.05, 1.0 + rng.gaussian(0.0, noise.scale_sigma));
    const bool flip = rng.bernoulli(noise.score_flip_prob);
    if (noise.center_sigma > 0.0 || noise.scale_sigma > 0.0) {
      s.box = BoundingBox::from_center({c.x + dx, c.y + dy}, gt.box.w * sw, gt.box.h * sh);
    }
    s.score = flip ? 0.0 : 1.0;
  }
  if (gt.visibility < noise.miss_visibility) {
    s.score = 0.0;
  }
  return s;
}

std::vector<Detection> sample_detections(std::span<const GtEntry> frame_gt,
                                         const NoiseModel& noise, FrameIndex frame) {
  std::vector<Detection> out;
  for (const auto& e : frame_gt) {
    if (e.visibility < noise.miss_visibility) {
      continue;
    }
    const auto s = sample_noisy(e, noise, NoiseStream::detection, frame);
    out.push_back({s.box, s.score});
  }
  return out;
}

std::vector<std::optional<std::size_t>> match_boxes_to_gt(std::span<const BoundingBox> boxes,
                                                          std::span<const GtEntry> frame_gt,
                                                          double min_iou) {
  std::vector<std::optional<std::size_t>> out(boxes.size());
  if (boxes.empty() || frame_gt.empty()) {
    return out;
  }
  CostMatrix costs(boxes.size(), frame_gt.size(), kForbidden);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = 0; j < frame_gt.size(); ++j) {
      const double v = iou(boxes[i], frame_gt[j].box);
      if (v >= min_iou) {
        costs(i, j) = 1.0 - v;
      }
    }
  }
  for (const auto& m : solve_min_cost(costs)) {
    out[m.row] = m.col;
  }
  return out;
}

GtOracleBackend::GtOracleBackend(std::span<const GtEntry> gt, NoiseModel noise)
    : gt_(group_by_frame(gt)), noise_(noise) {
  noise_.validate();
}

std::string GtOracleBackend::identity() const {
  std::ostringstream os;
  os << "gt-oracle(seed=" << noise_.rng_seed << ",center_sigma=" << noise_.center_sigma
     << ",scale_sigma=" << noise_.scale_sigma << ",flip=" << noise_.score_flip_prob
     << ",miss_visibility=" << noise_.miss_visibility << ')';
  return os.str();
}

std::span<const GtEntry> GtOracleBackend::frame_gt(FrameIndex frame) const {
  auto it = gt_.find(frame);
  if (it == gt_.end()) {
    return {};
  }
  return it->second;
}

RegressionOutput GtOracleBackend::do_reg_and_class(FrameIndex frame,
                                                   std::span<const BoundingBox> boxes) {
  const auto gt = frame_gt(frame);
  const auto matches = match_boxes_to_gt(boxes, gt);
  RegressionOutput out;
  out.boxes.reserve(boxes.size());
  out.scores.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!matches[i]) {
      out.boxes.push_back(boxes[i]);
      out.scores.push_back(0.0);
      continue;
    }
    const auto s = sample_noisy(gt[*matches[i]], noise_, NoiseStream::regression, frame);
    out.boxes.push_back(s.box);
    out.scores.push_back(s.score);
  }
  return out;
}

std::vector<Detection> GtOracleBackend::do_detect(FrameIndex frame) {
  return sample_detections(frame_gt(frame), noise_, frame);
}

namespace {

std::string_view trim_view(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::vector<double> parse_csv_numbers(std::string_view line, std::size_t lineno) {
  std::vector<double> values;
  std::string cell;
  std::istringstream ss{std::string(line)};
  while (std::getline(ss, cell, ',')) {
    const auto t = trim_view(cell);
    double value = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
      throw BackendError("regression log line " + std::to_string(lineno) + ": non-numeric field",
                         std::string(line));
    }
    values.push_back(value);
  }
  return values;
}

std::string box_csv(const BoundingBox& b) {
  return format_shortest(b.x) + ',' + format_shortest(b.y) + ',' + format_shortest(b.w) + ',' +
         format_shortest(b.h);
}

}  // namespace

FileBackend::FileBackend(std::istream& log, std::string source_name)
    : source_name_(std::move(source_name)) {
  std::string line;
  std::size_t lineno = 0;
  bool detections = false;
  while (std::getline(log, line)) {
    ++lineno;
    const auto t = trim_view(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    if (t == "[regression]") {
      detections = false;
      continue;
    }
    if (t == "[detections]") {
      detections = true;
      continue;
    }
    const auto v = parse_csv_numbers(t, lineno);
    if (detections) {
      if (v.size() < 7) {
        throw BackendError("regression log line " + std::to_string(lineno) +
                               ": detection needs at least 7 fields",
                           std::string(t));
      }
      detections_[static_cast<FrameIndex>(v[0])].push_back(
          {{v[2], v[3], v[4], v[5]}, v[6]});
    } else {
      if (v.size() != 10) {
        throw BackendError("regression log line " + std::to_string(lineno) +
                               ": expected 10 fields",
                           std::string(t));
      }
      regressions_[static_cast<FrameIndex>(v[0])].push_back(
          {{v[1], v[2], v[3], v[4]}, {v[5], v[6], v[7], v[8]}, v[9]});
    }
  }
}

RegressionOutput FileBackend::do_reg_and_class(FrameIndex frame,
                                               std::span<const BoundingBox> boxes) {
  RegressionOutput out;
  const auto it = regressions_.find(frame);
  for (const auto& q : boxes) {
    const Record* best = nullptr;
    double best_iou = 0.0;
    if (it != regressions_.end()) {
      for (const auto& r : it->second) {
        const double v = iou(q, r.in);
        if (v > best_iou) {
          best_iou = v;
          best = &r;
        }
      }
    }
    if (best == nullptr || best_iou < 0.99) {
      throw BackendError("no logged regression for frame " + std::to_string(frame) + " box " +
                             to_string(q),
                         box_csv(q));
    }
    out.boxes.push_back(best->out);
    out.scores.push_back(best->score);
  }
  return out;
}

std::vector<Detection> FileBackend::do_detect(FrameIndex frame) {
  auto it = detections_.find(frame);
  return it == detections_.end() ? std::vector<Detection>{} : it->second;
}

RecordingBackend::RecordingBackend(RegressorClassifier& inner, std::ostream& log)
    : inner_(inner), log_(log) {}

RegressionOutput RecordingBackend::do_reg_and_class(FrameIndex frame,
                                                    std::span<const BoundingBox> boxes) {
  auto out = inner_.reg_and_class(frame, boxes);
  if (in_detections_) {
    log_ << "[regression]\n";
    in_detections_ = false;
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    log_ << frame << ',' << box_csv(boxes[i]) << ',' << box_csv(out.boxes[i]) << ','
         << format_shortest(out.scores[i]) << '\n';
  }
  return out;
}

std::vector<Detection> RecordingBackend::do_detect(FrameIndex frame) {
  auto dets = inner_.detect(frame);
  if (!in_detections_) {
    log_ << "[detections]\n";
    in_detections_ = true;
  }
  for (const auto& d : dets) {
    log_ << frame << ",-1," << box_csv(d.box) << ',' << format_shortest(d.score) << '\n';
  }
  return dets;
}

}  // namespace regtrack
