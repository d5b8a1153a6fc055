#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "regtrack/core.hpp"
#include "regtrack/motio.hpp"
#include "regtrack/rng.hpp"

namespace regtrack::test {

inline BoundingBox random_box(KeyedRng& rng, double extent = 100.0, double min_size = 1.0,
                              double max_size = 40.0) {
  return {rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(min_size, max_size),
          rng.uniform(min_size, max_size)};
}

// Textbook O(n^2) NMS: scan boxes by score (ties by index) and keep a box
// unless a kept box overlaps it beyond the threshold.
inline std::vector<std::size_t> reference_nms(const std::vector<BoundingBox>& boxes,
                                              const std::vector<double>& scores,
                                              double threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      const BoundingBox& a = boxes[i];
      const BoundingBox& b = boxes[k];
      const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
      const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
      const double inter = iw > 0 && ih > 0 ? iw * ih : 0.0;
      if (inter / (a.w * a.h + b.w * b.h - inter) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(i);
    }
  }
  return kept;
}

inline GtEntry gt_row(FrameIndex f, TrackId id, BoundingBox b, double vis = 1.0) {
  return {f, id, b, 1, 1, vis};
}

inline ResultEntry res_row(FrameIndex f, TrackId id, BoundingBox b) { return {f, id, b, 1.0}; }

inline std::vector<ResultEntry> as_results(const std::vector<GtEntry>& gt) {
  std::vector<ResultEntry> out;
  for (const auto& g : gt) {
    out.push_back({g.frame, g.track_id, g.box, 1.0});
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("regtrack-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace regtrack::test
