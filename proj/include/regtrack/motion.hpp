#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regtrack/core.hpp"
#include "regtrack/image.hpp"
#include "regtrack/track.hpp"

namespace regtrack {

struct EccConfig {
  TransformKind mode{TransformKind::euclidean};
  int pyramid_levels{3};
  int max_iterations{100};
  double eps{1e-5};

  void validate() const;
};

struct EccResult {
  Transform2D transform;
  double correlation{0.0};
  bool converged{false};
  int iterations{0};
};

/// Estimates the warp W with cur(W(x)) ~ prev(x), i.e. W maps prev-frame
/// coordinates to cur-frame coordinates. Forward-additive ECC, run coarse to
/// fine. On non-convergence the best transform seen is returned with
/// converged = false. Throws std::invalid_argument for size mismatch or a
/// constant image.
EccResult ecc_align(const GrayImage& prev, const GrayImage& cur, const EccConfig& cfg = {});

/// Warps each box and clips it to the frame. nullopt marks a box pushed fully
/// outside the frame. An exact identity leaves every box untouched.
std::vector<std::optional<BoundingBox>> apply_cmc(std::span<const BoundingBox> boxes,
                                                  const Transform2D& t, double frame_w,
                                                  double frame_h);

/// center(t-1) - center(t-2) from the last two boxes; zero with fewer.
Point2 cva_velocity(const Track& track);

/// Last box shifted by cva_velocity; size unchanged.
BoundingBox cva_predict(const Track& track);

/// Supplies the camera transform from frame t-1 to frame t.
class CameraMotionSource {
 public:
  virtual ~CameraMotionSource() = default;
  virtual std::optional<Transform2D> motion(FrameIndex frame) = 0;
  virtual std::string identity() const = 0;
};

/// Fixed per-frame transforms, e.g. a known synthetic camera path.
class FixedCameraMotion final : public CameraMotionSource {
 public:
  explicit FixedCameraMotion(std::map<FrameIndex, Transform2D> transforms)
      : transforms_(std::move(transforms)) {}
  std::optional<Transform2D> motion(FrameIndex frame) override;
  std::string identity() const override { return "fixed"; }

 private:
  std::map<FrameIndex, Transform2D> transforms_;
};

/// ECC between consecutive frame images, loaded lazily through `loader`
/// (which throws when a frame is unavailable). If an image cannot be loaded,
/// compensation is switched off for the rest of the run and `warning()`
/// explains why. Frames where ECC rejects the pair (constant image) get no
/// compensation.
class EccCameraMotion final : public CameraMotionSource {
 public:
  using Loader = std::function<GrayImage(FrameIndex)>;

  EccCameraMotion(Loader loader, EccConfig cfg);
  /// Frames from the sequence's image directory.
  static Loader file_loader(std::function<std::optional<std::filesystem::path>(FrameIndex)> path);

  std::optional<Transform2D> motion(FrameIndex frame) override;
  std::string identity() const override;
  const std::optional<std::string>& warning() const { return warning_; }

 private:
  std::optional<GrayImage> load(FrameIndex frame);

  Loader loader_;
  EccConfig cfg_;
  std::optional<std::pair<FrameIndex, GrayImage>> cached_;
  std::optional<std::string> warning_;
  bool disabled_{false};
};

}  // namespace regtrack
