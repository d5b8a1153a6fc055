#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace regtrack {

/// 1-based frame number, as in MOTChallenge files.
using FrameIndex = int;

/// Positive track / object identity.
using TrackId = int;

struct Point2 {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned box in pixels. (x, y) is the top-left corner and y grows
/// downward. A valid box has finite fields and w > 0, h > 0.
struct BoundingBox {
  double x{0.0};
  double y{0.0};
  double w{0.0};
  double h{0.0};

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  // Measured from the corner coordinates so that intersecting a box with
  // itself reproduces its area bit-for-bit.
  double area() const { return (right() - x) * (bottom() - y); }
  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  bool valid() const;

  BoundingBox translated(double dx, double dy) const { return {x + dx, y + dy, w, h}; }
  BoundingBox recentered(Point2 c) const { return from_center(c, w, h); }

  static BoundingBox from_center(Point2 c, double w, double h) {
    return {c.x - 0.5 * w, c.y - 0.5 * h, w, h};
  }
  static BoundingBox from_corners(double x1, double y1, double x2, double y2) {
    return {x1, y1, x2 - x1, y2 - y1};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

std::string to_string(const BoundingBox& box);

/// A detector hit: box plus classification score in [0, 1].
struct Detection {
  BoundingBox box;
  double score{1.0};

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class TransformKind { euclidean, affine };

/// 2x3 warp mapping previous-frame pixel coordinates to current-frame pixel
/// coordinates: [x', y'] = [[m0 m1 m2], [m3 m4 m5]] * [x, y, 1].
struct Transform2D {
  TransformKind kind{TransformKind::euclidean};
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static Transform2D identity() { return {}; }
  static Transform2D translation(double dx, double dy);
  /// Counter-clockwise in image coordinates (y down), about `pivot`.
  static Transform2D rotation(double radians, Point2 pivot = {});
  static Transform2D rigid(double radians, double tx, double ty);
  static Transform2D affine(const std::array<double, 6>& m);

  Point2 apply(Point2 p) const {
    return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
  }
  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }
  Transform2D inverse() const;
  /// `next` applied after `*this`.
  Transform2D then(const Transform2D& next) const;
  bool is_exact_identity() const { return m == std::array<double, 6>{1, 0, 0, 0, 1, 0}; }
  /// Finite, invertible, and for euclidean kind a proper rotation block
  /// (orthonormal, det = +1) within 1e-6.
  bool valid() const;

  friend bool operator==(const Transform2D&, const Transform2D&) = default;
};

class InvalidTransformError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Intersection over union in [0, 1]; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Greedy NMS. Keeps the highest-scoring remaining box and drops every other
/// remaining box with IoU strictly greater than `threshold`. Equal scores are
/// ordered by lower input index. Returned indices are in keep order.
std::vector<std::size_t> nms(std::span<const BoundingBox> boxes,
                             std::span<const double> scores, double threshold);
std::vector<std::size_t> nms(std::span<const Detection> detections, double threshold);

/// Intersection with [0, frame_w] x [0, frame_h]; nullopt when empty.
std::optional<BoundingBox> clip_to_frame(const BoundingBox& box, double frame_w,
                                         double frame_h);

/// Axis-aligned hull of the four warped corners. Throws
/// InvalidTransformError when the hull is degenerate.
BoundingBox warp_box(const BoundingBox& box, const Transform2D& t);

}  // namespace regtrack
