#include "regtrack/oracles.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "regtrack/backends.hpp"

namespace regtrack {

OracleConfig OracleConfig::parse(const std::string& list) {
  OracleConfig cfg;
  std::istringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    if (name == "kill") {
      cfg.kill = true;
    } else if (name == "reg") {
      cfg.reg = true;
    } else if (name == "mm") {
      cfg.mm = true;
    } else if (name == "reid") {
      cfg.reid = true;
    } else if (name == "inter") {
      cfg.inter = true;
    } else if (name == "all") {
      cfg.kill = cfg.reg = cfg.mm = cfg.reid = true;
    } else if (name == "none" || name.empty()) {
    } else {
      throw std::invalid_argument("unknown oracle '" + name +
                                  "' (expected kill, reg, mm, reid, inter, all)");
    }
  }
  return cfg;
}

std::string OracleConfig::to_string() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (on) {
      out += out.empty() ? "" : ",";
      out += name;
    }
  };
  add(kill, "kill");
  add(reg, "reg");
  add(mm, "mm");
  add(reid, "reid");
  add(inter, "inter");
  return out.empty() ? "none" : out;
}

std::vector<std::optional<std::size_t>> oracle_match(std::span<const BoundingBox> boxes,
                                                     std::span<const GtEntry> frame_gt) {
  return match_boxes_to_gt(boxes, frame_gt, kOracleMatchIou);
}

std::vector<KillDecision> oracle_kill_decisions(std::span<const BoundingBox> boxes,
                                                std::span<const GtEntry> frame_gt) {
  const auto match = oracle_match(boxes, frame_gt);
  std::vector<KillDecision> out(boxes.size(), KillDecision::kill);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (match[i]) {
      out[i] = KillDecision::keep;
    }
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (out[i] == KillDecision::kill || out[j] == KillDecision::kill) {
        continue;
      }
      if (iou(boxes[i], boxes[j]) <= kOracleOcclusionIou) {
        continue;
      }
      const double vi = frame_gt[*match[i]].visibility;
      const double vj = frame_gt[*match[j]].visibility;
      out[vi < vj ? i : j] = KillDecision::kill;
    }
  }
  return out;
}

std::vector<BoundingBox> oracle_regress(std::span<const BoundingBox> boxes,
                                        std::span<const GtEntry> frame_gt) {
  const auto match = oracle_match(boxes, frame_gt);
  std::vector<BoundingBox> out(boxes.begin(), boxes.end());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (match[i]) {
      out[i] = frame_gt[*match[i]].box;
    }
  }
  return out;
}

std::vector<BoundingBox> oracle_motion(std::span<const BoundingBox> boxes,
                                       std::span<const GtEntry> frame_gt) {
  const auto match = oracle_match(boxes, frame_gt);
  std::vector<BoundingBox> out(boxes.begin(), boxes.end());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (match[i]) {
      out[i] = boxes[i].recentered(frame_gt[*match[i]].box.center());
    }
  }
  return out;
}

std::vector<std::optional<TrackId>> oracle_identities(std::span<const BoundingBox> boxes,
                                                      std::span<const GtEntry> frame_gt) {
  const auto match = oracle_match(boxes, frame_gt);
  std::vector<std::optional<TrackId>> out(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (match[i]) {
      out[i] = frame_gt[*match[i]].track_id;
    }
  }
  return out;
}

std::vector<std::optional<GtEntry>> oracle_successors(std::span<const BoundingBox> prev_boxes,
                                                      std::span<const GtEntry> prev_gt,
                                                      std::span<const GtEntry> cur_gt) {
  const auto ids = oracle_identities(prev_boxes, prev_gt);
  std::vector<std::optional<GtEntry>> out(prev_boxes.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!ids[i]) {
      continue;
    }
    const auto it = std::find_if(cur_gt.begin(), cur_gt.end(),
                                 [&](const GtEntry& e) { return e.track_id == *ids[i]; });
    if (it != cur_gt.end()) {
      out[i] = *it;
    }
  }
  return out;
}

std::vector<ReidMatch> oracle_reid(std::span<const std::optional<TrackId>> gallery_ids,
                                   std::span<const BoundingBox> candidates,
                                   std::span<const GtEntry> frame_gt) {
  std::map<TrackId, std::size_t> by_identity;
  for (std::size_t g = 0; g < gallery_ids.size(); ++g) {
    if (gallery_ids[g]) {
      by_identity[*gallery_ids[g]] = g;
    }
  }
  std::vector<ReidMatch> out;
  const auto ids = oracle_identities(candidates, frame_gt);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (!ids[c]) {
      continue;
    }
    const auto it = by_identity.find(*ids[c]);
    if (it != by_identity.end()) {
      out.push_back({it->second, c});
      by_identity.erase(it);
    }
  }
  return out;
}

void interpolate_gaps(Track& track) {
  std::vector<TrackBox> filled;
  filled.reserve(track.boxes.size());
  for (std::size_t i = 0; i < track.boxes.size(); ++i) {
    if (i > 0) {
      const TrackBox& a = track.boxes[i - 1];
      const TrackBox& b = track.boxes[i];
      const int gap = b.frame - a.frame;
      for (int k = 1; k < gap; ++k) {
        const double f = static_cast<double>(k) / gap;
        auto lerp = [f](double u, double v) { return u + (v - u) * f; };
        filled.push_back({a.frame + k,
                          {lerp(a.box.x, b.box.x), lerp(a.box.y, b.box.y), lerp(a.box.w, b.box.w),
                           lerp(a.box.h, b.box.h)},
                          std::min(a.score, b.score)});
      }
    }
    filled.push_back(track.boxes[i]);
  }
  track.boxes = std::move(filled);
}

}  // namespace regtrack
