#include "regtrack/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace regtrack {

bool BoundingBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
         w > 0.0 && h > 0.0;
}

std::string to_string(const BoundingBox& box) {
  std::ostringstream os;
  os << '(' << box.x << ',' << box.y << ',' << box.w << ',' << box.h << ')';
  return os.str();
}

Transform2D Transform2D::translation(double dx, double dy) {
  Transform2D t;
  t.m = {1.0, 0.0, dx, 0.0, 1.0, dy};
  return t;
}

Transform2D Transform2D::rotation(double radians, Point2 pivot) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  // p' = R (p - pivot) + pivot
  Transform2D t;
  t.m = {c, -s, pivot.x - c * pivot.x + s * pivot.y, s, c, pivot.y - s * pivot.x - c * pivot.y};
  return t;
}

Transform2D Transform2D::rigid(double radians, double tx, double ty) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  Transform2D t;
  t.m = {c, -s, tx, s, c, ty};
  return t;
}

Transform2D Transform2D::affine(const std::array<double, 6>& m) {
  Transform2D t;
  t.kind = TransformKind::affine;
  t.m = m;
  return t;
}

Transform2D Transform2D::inverse() const {
  const double det = determinant();
  if (det == 0.0 || !std::isfinite(det)) {
    throw InvalidTransformError("transform is not invertible");
  }
  const double a = m[4] / det;
  const double b = -m[1] / det;
  const double c = -m[3] / det;
  const double d = m[0] / det;
  Transform2D inv;
  inv.kind = kind;
  inv.m = {a, b, -(a * m[2] + b * m[5]), c, d, -(c * m[2] + d * m[5])};
  return inv;
}

Transform2D Transform2D::then(const Transform2D& next) const {
  const auto& n = next.m;
  Transform2D out;
  out.kind = (kind == TransformKind::affine || next.kind == TransformKind::affine)
                 ? TransformKind::affine
                 : TransformKind::euclidean;
  out.m = {n[0] * m[0] + n[1] * m[3],        n[0] * m[1] + n[1] * m[4],
           n[0] * m[2] + n[1] * m[5] + n[2], n[3] * m[0] + n[4] * m[3],
           n[3] * m[1] + n[4] * m[4],        n[3] * m[2] + n[4] * m[5] + n[5]};
  return out;
}

bool Transform2D::valid() const {
  if (!std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); })) {
    return false;
  }
  if (kind == TransformKind::euclidean) {
    constexpr double tol = 1e-6;
    const double col0 = m[0] * m[0] + m[3] * m[3];
    const double col1 = m[1] * m[1] + m[4] * m[4];
    const double dot = m[0] * m[1] + m[3] * m[4];
    return std::abs(col0 - 1.0) < tol && std::abs(col1 - 1.0) < tol && std::abs(dot) < tol &&
           std::abs(determinant() - 1.0) < tol;
  }
  return determinant() != 0.0;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms(std::span<const BoundingBox> boxes,
                             std::span<const double> scores, double threshold) {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("nms: boxes and scores differ in length");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<bool> suppressed(boxes.size(), false);
  std::vector<std::size_t> keep;
  keep.reserve(boxes.size());
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) {
      continue;
    }
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i], boxes[j]) > threshold) {
        suppressed[j] = true;
      }
    }
  }
  return keep;
}

std::vector<std::size_t> nms(std::span<const Detection> detections, double threshold) {
  std::vector<BoundingBox> boxes;
  std::vector<double> scores;
  boxes.reserve(detections.size());
  scores.reserve(detections.size());
  for (const auto& d : detections) {
    boxes.push_back(d.box);
    scores.push_back(d.score);
  }
  return nms(boxes, scores, threshold);
}

std::optional<BoundingBox> clip_to_frame(const BoundingBox& box, double frame_w,
                                         double frame_h) {
  const double x1 = std::max(box.x, 0.0);
  const double y1 = std::max(box.y, 0.0);
  const double x2 = std::min(box.right(), frame_w);
  const double y2 = std::min(box.bottom(), frame_h);
  if (!(x2 > x1) || !(y2 > y1)) {
    return std::nullopt;
  }
  if (x1 == box.x && y1 == box.y && x2 == box.right() && y2 == box.bottom()) {
    return box;
  }
  return BoundingBox::from_corners(x1, y1, x2, y2);
}

BoundingBox warp_box(const BoundingBox& box, const Transform2D& t) {
  if (t.is_exact_identity()) {
    return box;
  }
  const std::array<Point2, 4> corners{Point2{box.x, box.y}, Point2{box.right(), box.y},
                                      Point2{box.x, box.bottom()},
                                      Point2{box.right(), box.bottom()}};
  double x1 = INFINITY, y1 = INFINITY, x2 = -INFINITY, y2 = -INFINITY;
  for (const auto& c : corners) {
    const Point2 p = t.apply(c);
    x1 = std::min(x1, p.x);
    y1 = std::min(y1, p.y);
    x2 = std::max(x2, p.x);
    y2 = std::max(y2, p.y);
  }
  const BoundingBox out = BoundingBox::from_corners(x1, y1, x2, y2);
  if (!out.valid()) {
    throw InvalidTransformError("warp_box: transform collapses box " + to_string(box));
  }
  return out;
}

}  // namespace regtrack
