#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regtrack/backends.hpp"
#include "regtrack/core.hpp"
#include "regtrack/image.hpp"
#include "regtrack/motio.hpp"

// Synthetic MOTChallenge-style sequences: constant-velocity boxes bouncing
// inside the world rectangle, scripted occlusions, optional camera motion and
// rendered textured frames.

namespace regtrack {

/// Track `b` is pulled onto track `a`'s center for frames
/// [start, start + length - 1], blending in and out linearly over
/// `SynthConfig::occlusion_ramp` frames on each side.
struct OcclusionEvent {
  TrackId a{1};
  TrackId b{2};
  FrameIndex start{1};
  int length{1};

  friend bool operator==(const OcclusionEvent&, const OcclusionEvent&) = default;
};

class InfeasibleConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthConfig {
  int n_tracks{5};
  int n_frames{50};
  int frame_w{640};
  int frame_h{480};
  double speed_min{0.5};
  double speed_max{3.0};
  /// Box height range; width = aspect * height.
  double size_min{60.0};
  double size_max{140.0};
  double aspect{0.4};
  std::vector<OcclusionEvent> occlusion_events;
  int occlusion_ramp{8};
  /// Empty for a static camera. Otherwise n_frames transforms: entry 0 maps
  /// world to frame 1, entry t-1 maps frame t-1 to frame t.
  std::vector<Transform2D> camera_path;
  std::uint64_t rng_seed{0};
  /// Random contiguous lifetimes instead of every track spanning the whole
  /// sequence.
  bool staggered_lifetimes{false};
  /// Resample trajectories until no two boxes ever overlap above this IoU
  /// (occlusion events excepted).
  std::optional<double> max_pair_iou;
  bool render_images{false};
  std::string name{"SYNTH"};

  /// Throws std::invalid_argument / InfeasibleConfigError.
  void validate() const;
};

/// Deterministic smooth pseudo-random intensity field in [0, 1].
class SmoothTexture {
 public:
  SmoothTexture(std::uint64_t seed, int waves = 8, double min_period = 24.0,
                double max_period = 160.0);
  double operator()(double x, double y) const;

 private:
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves_;
  double norm_{1.0};
};

/// Textured image whose intensity at pixel p is texture(W^-1(p)), so that
/// render(W)(W(x)) = render(identity)(x) exactly.
GrayImage render_texture(const SmoothTexture& texture, int width, int height,
                         const Transform2D& world_to_image = Transform2D::identity());

struct SynthSequence {
  SequenceInfo info;
  std::vector<GtEntry> gt;
  /// World box per (track, frame) before camera projection.
  std::map<TrackId, std::map<FrameIndex, BoundingBox>> world_boxes;
  /// World -> frame t transform, index t-1.
  std::vector<Transform2D> camera;
  std::vector<GrayImage> images;

  /// Frame t-1 -> frame t transforms for t >= 2.
  std::map<FrameIndex, Transform2D> camera_motion() const;
};

SynthSequence generate(const SynthConfig& cfg);

/// Fraction of `box` not covered by the union of `occluders`.
double visible_fraction(const BoundingBox& box, std::span<const BoundingBox> occluders);

DetectionsByFrame derive_detections(std::span<const GtEntry> gt, const NoiseModel& noise);

/// seqinfo.ini, gt/gt.txt, det/det.txt and img1/%06d.pgm (when rendered).
void write_sequence(const std::filesystem::path& dir, const SynthSequence& seq,
                    const DetectionsByFrame& detections);

/// In-memory SequenceData equivalent to writing and loading the sequence.
SequenceData to_sequence_data(const SynthSequence& seq, const DetectionsByFrame& detections);

}  // namespace regtrack
