#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regtrack/core.hpp"
#include "regtrack/motio.hpp"

namespace regtrack {

struct RegressionOutput {
  std::vector<BoundingBox> boxes;
  std::vector<double> scores;
};

/// Raised for any backend failure; `payload()` carries the offending raw
/// data (a response line, a query) when there is one.
class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& message, std::string payload = {})
      : std::runtime_error(message), payload_(std::move(payload)) {}
  const std::string& payload() const { return payload_; }

 private:
  std::string payload_;
};

/// The detector role: regress + classify given boxes in a frame, and detect
/// all objects in a frame.
///
/// The public calls validate what implementations return (one box and one
/// score in [0, 1] per input box, valid boxes) and throw BackendError
/// otherwise, so callers never see a malformed answer.
class RegressorClassifier {
 public:
  virtual ~RegressorClassifier() = default;

  RegressionOutput reg_and_class(FrameIndex frame, std::span<const BoundingBox> boxes);
  std::vector<Detection> detect(FrameIndex frame);

  /// Stable description recorded in run manifests.
  virtual std::string identity() const = 0;

 protected:
  virtual RegressionOutput do_reg_and_class(FrameIndex frame,
                                            std::span<const BoundingBox> boxes) = 0;
  virtual std::vector<Detection> do_detect(FrameIndex frame) = 0;
};

/// Desk-scale stand-in for detector error.
///
/// Matched boxes are perturbed as: center += N(0, center_sigma) per axis,
/// w and h *= (1 + N(0, scale_sigma)) each (factor floored at 0.05). The
/// score is 1, flipped to 0 with probability score_flip_prob, and forced to
/// 0 when the object's visibility is below miss_visibility. Every draw comes
/// from KeyedRng(rng_seed, {stream, frame, object id}), so a box's noise does
/// not depend on call order.
struct NoiseModel {
  double center_sigma{0.0};
  double scale_sigma{0.0};
  double score_flip_prob{0.0};
  double miss_visibility{0.0};
  std::uint64_t rng_seed{0};

  void validate() const;
  bool is_zero() const {
    return center_sigma == 0.0 && scale_sigma == 0.0 && score_flip_prob == 0.0;
  }
};

enum class NoiseStream : std::uint64_t { regression = 1, detection = 2 };

struct NoisySample {
  BoundingBox box;
  double score{1.0};
};

/// The perturbation shared by the GT oracle backend and synthetic detections.
NoisySample sample_noisy(const GtEntry& gt, const NoiseModel& noise, NoiseStream stream,
                         FrameIndex frame);

/// GT boxes of one frame with visibility >= miss_visibility, perturbed.
std::vector<Detection> sample_detections(std::span<const GtEntry> frame_gt,
                                         const NoiseModel& noise, FrameIndex frame);

/// Min-cost (1 - IoU) matching of boxes to GT boxes with an IoU >= min_iou
/// gate. Result[i] is the GT index matched to box i, if any.
std::vector<std::optional<std::size_t>> match_boxes_to_gt(std::span<const BoundingBox> boxes,
                                                          std::span<const GtEntry> frame_gt,
                                                          double min_iou = 0.5);

/// Regression and detection answered from ground truth plus noise.
class GtOracleBackend final : public RegressorClassifier {
 public:
  GtOracleBackend(std::span<const GtEntry> gt, NoiseModel noise);

  std::string identity() const override;
  const NoiseModel& noise() const { return noise_; }

 protected:
  RegressionOutput do_reg_and_class(FrameIndex frame, std::span<const BoundingBox> boxes) override;
  std::vector<Detection> do_detect(FrameIndex frame) override;

 private:
  std::span<const GtEntry> frame_gt(FrameIndex frame) const;

  GtByFrame gt_;
  NoiseModel noise_;
};

/// Replays a regression log.
///
/// Format, one record per line, `#` starts a comment:
///   [regression]   (default section)
///   frame,in_x,in_y,in_w,in_h,out_x,out_y,out_w,out_h,score
///   [detections]
///   frame,-1,x,y,w,h,score[,-1,-1,-1]
/// Queries are answered from the logged input box of the same frame with the
/// highest IoU, which must be at least 0.99.
class FileBackend final : public RegressorClassifier {
 public:
  explicit FileBackend(std::istream& log, std::string source_name = "stream");

  std::string identity() const override { return "file:" + source_name_; }

 protected:
  RegressionOutput do_reg_and_class(FrameIndex frame, std::span<const BoundingBox> boxes) override;
  std::vector<Detection> do_detect(FrameIndex frame) override;

 private:
  struct Record {
    BoundingBox in;
    BoundingBox out;
    double score;
  };
  std::map<FrameIndex, std::vector<Record>> regressions_;
  DetectionsByFrame detections_;
  std::string source_name_;
};

/// Forwards to another backend and writes every exchange in the FileBackend
/// log format, so a run can later be replayed without the original backend.
class RecordingBackend final : public RegressorClassifier {
 public:
  RecordingBackend(RegressorClassifier& inner, std::ostream& log);

  std::string identity() const override { return inner_.identity(); }

 protected:
  RegressionOutput do_reg_and_class(FrameIndex frame, std::span<const BoundingBox> boxes) override;
  std::vector<Detection> do_detect(FrameIndex frame) override;

 private:
  RegressorClassifier& inner_;
  std::ostream& log_;
  bool in_detections_{false};
};

/// Talks newline-delimited JSON with a child process over its stdin/stdout.
///
///   request:  {"op":"reg_and_class","frame":F,"boxes":[[x,y,w,h],...]}
///             {"op":"detect","frame":F}
///   response: {"boxes":[[x,y,w,h],...],"scores":[s,...]}
///
/// One request and one response per line, in order. A single channel, so
/// calls must not be made concurrently on one instance.
class ExternalBackend final : public RegressorClassifier {
 public:
  ExternalBackend(std::vector<std::string> argv, std::chrono::milliseconds timeout);
  ~ExternalBackend() override;
  ExternalBackend(const ExternalBackend&) = delete;
  ExternalBackend& operator=(const ExternalBackend&) = delete;

  std::string identity() const override;

 protected:
  RegressionOutput do_reg_and_class(FrameIndex frame, std::span<const BoundingBox> boxes) override;
  std::vector<Detection> do_detect(FrameIndex frame) override;

 private:
  std::string exchange(const std::string& request);
  RegressionOutput decode(const std::string& line) const;

  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  int pid_{-1};
  int fd_{-1};
  std::string pending_;
  bool broken_{false};
};

/// Runs `command` through /bin/sh -c.
std::vector<std::string> shell_command(const std::string& command);

}  // namespace regtrack
