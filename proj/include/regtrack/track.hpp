#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "regtrack/core.hpp"

namespace regtrack {

using Embedding = std::vector<double>;

enum class TrackState { active, inactive };

struct TrackBox {
  FrameIndex frame{1};
  BoundingBox box;
  double score{1.0};

  friend bool operator==(const TrackBox&, const TrackBox&) = default;
};

/// One trajectory. `boxes` holds only boxes emitted while the track was
/// active, with strictly increasing frames.
struct Track {
  TrackId id{0};
  std::vector<TrackBox> boxes;
  TrackState state{TrackState::active};
  std::optional<FrameIndex> inactive_since;
  std::optional<BoundingBox> last_unregressed_box;
  std::deque<Embedding> embedding_history;

  FrameIndex first_frame() const { return boxes.front().frame; }
  FrameIndex last_frame() const { return boxes.back().frame; }
  const BoundingBox& last_box() const { return boxes.back().box; }
  std::optional<BoundingBox> box_at(FrameIndex frame) const;
};

}  // namespace regtrack
