#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regtrack/backends.hpp"
#include "regtrack/core.hpp"
#include "regtrack/embedding.hpp"
#include "regtrack/motio.hpp"
#include "regtrack/motion.hpp"
#include "regtrack/oracles.hpp"
#include "regtrack/track.hpp"

namespace regtrack {

enum class DetectionMode { private_detections, public_detections };

std::string to_string(DetectionMode mode);
/// "private" or "public"; throws std::invalid_argument otherwise.
DetectionMode parse_detection_mode(const std::string& name);

struct TrackerConfig {
  double sigma_active{0.5};
  double lambda_active{0.6};
  double lambda_new{0.3};
  int f_reid{10};
  double reid_distance_threshold{2.0};
  double reid_iou_gate{0.3};
  bool enable_cmc{false};
  bool enable_cva{false};
  bool enable_reid{false};
  DetectionMode mode{DetectionMode::public_detections};
  /// Appearance vectors kept per track; their mean represents the track.
  int embedding_history{10};
  /// Frame size for clipping; 0 disables clipping.
  double frame_width{0.0};
  double frame_height{0.0};

  void validate() const;
  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

struct FrameInput {
  FrameIndex frame{1};
  /// Public detections; ignored in private mode, empty when absent.
  std::optional<std::vector<Detection>> detections;
  /// Camera transform from frame-1 to frame, used when CMC is enabled.
  std::optional<Transform2D> camera_motion;
};

struct ActiveBox {
  TrackId id{0};
  BoundingBox box;
  double score{1.0};

  friend bool operator==(const ActiveBox&, const ActiveBox&) = default;
};

/// Ground truth consulted by the oracle components.
struct OracleSettings {
  OracleConfig config;
  GtByFrame gt;
};

/// Online tracker. Frames must be stepped in strictly increasing order. A
/// step that throws (backend or embedder failure) leaves the state as it was.
class Tracker {
 public:
  Tracker(TrackerConfig cfg, RegressorClassifier& backend, EmbeddingProvider* embedder = nullptr,
          std::optional<OracleSettings> oracle = std::nullopt);

  std::vector<ActiveBox> step(const FrameInput& input);

  /// Moves active and gallery tracks to the finished list and returns every
  /// track sorted by id. The tracker is empty afterwards.
  std::vector<Track> finish();

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Track>& active_tracks() const { return active_; }
  std::size_t gallery_size() const { return gallery_.size(); }
  std::vector<TrackId> gallery_ids() const;
  std::optional<FrameIndex> last_frame() const { return last_frame_; }

  struct GalleryEntry {
    Track track;
    BoundingBox box;
    Point2 velocity;
    Embedding appearance;
    std::optional<TrackId> gt_id;
  };

 private:
  TrackerConfig cfg_;
  RegressorClassifier& backend_;
  EmbeddingProvider* embedder_;
  std::optional<OracleSettings> oracle_;

  std::vector<Track> active_;
  std::vector<GalleryEntry> gallery_;
  std::vector<Track> finished_;
  TrackId next_id_{1};
  std::optional<FrameIndex> last_frame_;
};

/// What reID needs from a gallery track: its motion-advanced box and mean
/// appearance (empty when unknown, which forbids every pairing).
struct ReidGalleryItem {
  BoundingBox box;
  Embedding appearance;
};

/// Embedding-distance reID: gallery x candidate cost matrix, forbidden where
/// IoU(gallery box, candidate) < iou_gate or distance > max_distance,
/// solved by min-cost assignment.
std::vector<ReidMatch> try_reid(std::span<const ReidGalleryItem> gallery,
                                std::span<const Detection> candidates,
                                std::span<const Embedding> candidate_embeddings,
                                const EmbeddingProvider& embedder, double max_distance,
                                double iou_gate);

struct RunOptions {
  OracleConfig oracle;
  CameraMotionSource* camera{nullptr};
};

struct RunResult {
  std::vector<Track> tracks;
  std::vector<std::string> warnings;
};

/// Steps through frames 1..info.length. Public detections come from the
/// sequence; oracle components read its considered ground truth.
RunResult run_tracker(const SequenceData& seq, const TrackerConfig& cfg,
                      RegressorClassifier& backend, EmbeddingProvider* embedder = nullptr,
                      const RunOptions& options = {});

}  // namespace regtrack
