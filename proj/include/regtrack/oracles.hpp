#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regtrack/core.hpp"
#include "regtrack/motio.hpp"
#include "regtrack/track.hpp"

// Ground-truth substitutes for individual tracker components. Every function
// is pure; matching is min-cost (1 - IoU) assignment gated at IoU 0.5.

namespace regtrack {

inline constexpr double kOracleMatchIou = 0.5;
inline constexpr double kOracleOcclusionIou = 0.8;

struct OracleConfig {
  bool kill{false};
  bool reg{false};
  bool mm{false};
  bool reid{false};
  /// Hindsight linear interpolation over gaps of revived tracks. Not online.
  bool inter{false};

  static OracleConfig all() { return {true, true, true, true, false}; }
  bool any() const { return kill || reg || mm || reid || inter; }
  /// Oracle-ALL: GT killing, regression and reID.
  bool is_all() const { return kill && reg && reid; }

  /// Comma list of kill, reg, mm, reid, inter, all (all = kill,reg,mm,reid).
  /// Throws std::invalid_argument on an unknown name.
  static OracleConfig parse(const std::string& list);
  std::string to_string() const;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

enum class KillDecision { keep, kill };

/// Keeps a box iff it is matched to a GT box at IoU >= 0.5. Among kept boxes,
/// any pair overlapping at IoU > 0.8 loses the one whose GT has the lower
/// visibility (on a tie, the later box).
std::vector<KillDecision> oracle_kill_decisions(std::span<const BoundingBox> boxes,
                                                std::span<const GtEntry> frame_gt);

/// Index into frame_gt of the GT matched to each box, if any.
std::vector<std::optional<std::size_t>> oracle_match(std::span<const BoundingBox> boxes,
                                                     std::span<const GtEntry> frame_gt);

/// Matched GT box, exactly; unmatched boxes unchanged.
std::vector<BoundingBox> oracle_regress(std::span<const BoundingBox> boxes,
                                        std::span<const GtEntry> frame_gt);

/// Matched boxes recentred on their GT center with w, h kept.
std::vector<BoundingBox> oracle_motion(std::span<const BoundingBox> boxes,
                                       std::span<const GtEntry> frame_gt);

/// GT identity of each box, via the same matching.
std::vector<std::optional<TrackId>> oracle_identities(std::span<const BoundingBox> boxes,
                                                      std::span<const GtEntry> frame_gt);

/// For each box at frame t-1, the frame-t GT entry of the identity it matched
/// at t-1, when that identity is still present at t.
std::vector<std::optional<GtEntry>> oracle_successors(std::span<const BoundingBox> prev_boxes,
                                                      std::span<const GtEntry> prev_gt,
                                                      std::span<const GtEntry> cur_gt);

struct ReidMatch {
  std::size_t gallery{0};
  std::size_t candidate{0};

  friend bool operator==(const ReidMatch&, const ReidMatch&) = default;
};

/// Revives a gallery track with a candidate iff both carry the same GT
/// identity. Candidates are matched to frame_gt; gallery identities are
/// supplied by the caller. If several gallery tracks share an identity the
/// one listed last wins.
std::vector<ReidMatch> oracle_reid(std::span<const std::optional<TrackId>> gallery_ids,
                                   std::span<const BoundingBox> candidates,
                                   std::span<const GtEntry> frame_gt);

/// Fills every frame gap inside the track with boxes interpolated linearly
/// between the flanking boxes; the score of an inserted box is the lower of
/// the two flanking scores.
void interpolate_gaps(Track& track);

}  // namespace regtrack
