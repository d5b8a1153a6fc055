#include "regtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regtrack/assignment.hpp"

namespace regtrack {

std::string to_string(DetectionMode mode) {
  return mode == DetectionMode::private_detections ? "private" : "public";
}

DetectionMode parse_detection_mode(const std::string& name) {
  if (name == "private") {
    return DetectionMode::private_detections;
  }
  if (name == "public") {
    return DetectionMode::public_detections;
  }
  throw std::invalid_argument("unknown mode '" + name + "' (expected private or public)");
}

void TrackerConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(sigma_active)) {
    throw std::invalid_argument("sigma_active must lie in [0,1]");
  }
  if (!unit(lambda_active) || !unit(lambda_new)) {
    throw std::invalid_argument("lambda_active and lambda_new must lie in [0,1]");
  }
  if (!unit(reid_iou_gate)) {
    throw std::invalid_argument("reid_iou_gate must lie in [0,1]");
  }
  if (f_reid < 0) {
    throw std::invalid_argument("f_reid must be >= 0");
  }
  if (!(reid_distance_threshold >= 0.0)) {
    throw std::invalid_argument("reid_distance_threshold must be >= 0");
  }
  if (embedding_history < 1) {
    throw std::invalid_argument("embedding_history must be >= 1");
  }
  if (!(frame_width >= 0.0) || !(frame_height >= 0.0)) {
    throw std::invalid_argument("frame size must be >= 0");
  }
}

std::vector<ReidMatch> try_reid(std::span<const ReidGalleryItem> gallery,
                                std::span<const Detection> candidates,
                                std::span<const Embedding> candidate_embeddings,
                                const EmbeddingProvider& embedder, double max_distance,
                                double iou_gate) {
  if (candidate_embeddings.size() != candidates.size()) {
    throw std::invalid_argument("try_reid: one embedding per candidate required");
  }
  if (gallery.empty() || candidates.empty()) {
    return {};
  }
  CostMatrix costs(gallery.size(), candidates.size(), kForbidden);
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    if (gallery[g].appearance.empty()) {
      continue;
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (iou(gallery[g].box, candidates[c].box) < iou_gate) {
        continue;
      }
      const double d = embedder.distance(gallery[g].appearance, candidate_embeddings[c]);
      if (d <= max_distance) {
        costs(g, c) = d;
      }
    }
  }
  std::vector<ReidMatch> out;
  for (const auto& m : solve_min_cost(costs)) {
    out.push_back({m.row, m.col});
  }
  return out;
}

Tracker::Tracker(TrackerConfig cfg, RegressorClassifier& backend, EmbeddingProvider* embedder,
                 std::optional<OracleSettings> oracle)
    : cfg_(cfg), backend_(backend), embedder_(embedder), oracle_(std::move(oracle)) {
  cfg_.validate();
}

std::vector<TrackId> Tracker::gallery_ids() const {
  std::vector<TrackId> ids;
  for (const auto& g : gallery_) {
    ids.push_back(g.track.id);
  }
  return ids;
}

namespace {

enum class Fate { survive, deactivate, lost };

struct ActivePlan {
  Fate fate{Fate::survive};
  BoundingBox predicted;
  TrackBox next;
  std::optional<TrackId> gt_id;
};

// A gallery member for this frame: an existing entry or a track deactivated
// in this very frame.
struct PoolItem {
  bool from_gallery{true};
  std::size_t index{0};
  ReidGalleryItem reid;
  std::optional<TrackId> gt_id;
};

}  // namespace

std::vector<ActiveBox> Tracker::step(const FrameInput& input) {
  const FrameIndex t = input.frame;
  if (last_frame_ && t <= *last_frame_) {
    throw std::invalid_argument("frame " + std::to_string(t) + " presented after frame " +
                                std::to_string(*last_frame_));
  }
  const bool clip = cfg_.frame_width > 0.0 && cfg_.frame_height > 0.0;
  auto clip_box = [&](const BoundingBox& b) -> std::optional<BoundingBox> {
    if (!clip) {
      return b;
    }
    return clip_to_frame(b, cfg_.frame_width, cfg_.frame_height);
  };
  auto gt_at = [this](FrameIndex f) -> const std::vector<GtEntry>* {
    if (!oracle_) {
      return nullptr;
    }
    const auto it = oracle_->gt.find(f);
    return it == oracle_->gt.end() ? nullptr : &it->second;
  };
  const OracleConfig oc = oracle_ ? oracle_->config : OracleConfig{};
  const std::vector<GtEntry>* gt_cur = gt_at(t);
  const std::vector<GtEntry>* gt_prev = gt_at(t - 1);
  const bool use_reid_gallery = cfg_.enable_reid || oc.reid;

  // (1)-(2) Motion: CMC then CVA, for active and gallery boxes.
  std::vector<ActivePlan> plan(active_.size());
  std::vector<BoundingBox> last_boxes;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    plan[i].predicted = active_[i].last_box();
    last_boxes.push_back(active_[i].last_box());
  }
  std::vector<std::optional<BoundingBox>> gallery_box;
  for (const auto& g : gallery_) {
    if (t - *g.track.inactive_since > cfg_.f_reid) {
      gallery_box.emplace_back();
    } else {
      gallery_box.emplace_back(g.box);
    }
  }
  const bool cmc = cfg_.enable_cmc && input.camera_motion && !input.camera_motion->is_exact_identity();
  if (cmc) {
    const Transform2D& w = *input.camera_motion;
    if (!w.valid()) {
      throw InvalidTransformError("camera motion transform is not valid");
    }
    for (auto& p : plan) {
      const auto warped = clip_box(warp_box(p.predicted, w));
      if (warped) {
        p.predicted = *warped;
      } else {
        p.fate = Fate::lost;
      }
    }
    for (auto& gb : gallery_box) {
      if (gb) {
        gb = clip_box(warp_box(*gb, w));
      }
    }
  }
  if (cfg_.enable_cva) {
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const Point2 v = cva_velocity(active_[i]);
      plan[i].predicted = plan[i].predicted.translated(v.x, v.y);
    }
    for (std::size_t j = 0; j < gallery_.size(); ++j) {
      if (gallery_box[j]) {
        gallery_box[j] = gallery_box[j]->translated(gallery_[j].velocity.x, gallery_[j].velocity.y);
      }
    }
  }

  // Identities of the active tracks at t-1, for the oracles.
  std::vector<std::optional<GtEntry>> successors(active_.size());
  if (gt_prev != nullptr && gt_cur != nullptr && (oc.mm || oc.reg)) {
    successors = oracle_successors(last_boxes, *gt_prev, *gt_cur);
  }
  std::vector<std::optional<TrackId>> prev_ids(active_.size());
  if (gt_prev != nullptr && oc.reid) {
    prev_ids = oracle_identities(last_boxes, *gt_prev);
  }
  if (oc.mm) {
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (successors[i] && plan[i].fate != Fate::lost) {
        plan[i].predicted = plan[i].predicted.recentered(successors[i]->box.center());
      }
    }
  }

  // (3) Regression and classification of every surviving prediction.
  std::vector<std::size_t> queried;
  std::vector<BoundingBox> query;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    plan[i].gt_id = prev_ids[i];
    if (plan[i].fate != Fate::lost) {
      queried.push_back(i);
      query.push_back(plan[i].predicted);
    }
  }
  RegressionOutput reg;
  if (!query.empty()) {
    reg = backend_.reg_and_class(t, query);
  }
  for (std::size_t q = 0; q < queried.size(); ++q) {
    const std::size_t i = queried[q];
    BoundingBox box = reg.boxes[q];
    if (oc.reg && successors[i]) {
      box = successors[i]->box;
    }
    const auto clipped = clip_box(box);
    if (!clipped) {
      plan[i].fate = Fate::deactivate;
      continue;
    }
    plan[i].next = {t, *clipped, reg.scores[q]};
  }

  // (3)-(4) Kill policy.
  std::vector<std::size_t> alive;
  for (std::size_t i : queried) {
    if (plan[i].fate == Fate::survive) {
      alive.push_back(i);
    }
  }
  if (oc.kill && gt_cur != nullptr) {
    std::vector<BoundingBox> boxes;
    for (std::size_t i : alive) {
      boxes.push_back(plan[i].next.box);
    }
    const auto decisions = oracle_kill_decisions(boxes, *gt_cur);
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      if (decisions[k] == KillDecision::kill) {
        plan[alive[k]].fate = Fate::deactivate;
      } else {
        kept.push_back(alive[k]);
      }
    }
    alive = std::move(kept);
  } else {
    std::vector<std::size_t> scored;
    for (std::size_t i : alive) {
      if (plan[i].next.score < cfg_.sigma_active) {
        plan[i].fate = Fate::deactivate;
      } else {
        scored.push_back(i);
      }
    }
    std::vector<BoundingBox> boxes;
    std::vector<double> scores;
    for (std::size_t i : scored) {
      boxes.push_back(plan[i].next.box);
      scores.push_back(plan[i].next.score);
    }
    std::vector<bool> keep(scored.size(), false);
    for (std::size_t k : nms(boxes, scores, cfg_.lambda_active)) {
      keep[k] = true;
    }
    alive.clear();
    for (std::size_t k = 0; k < scored.size(); ++k) {
      if (keep[k]) {
        alive.push_back(scored[k]);
      } else {
        plan[scored[k]].fate = Fate::deactivate;
      }
    }
  }
  std::sort(alive.begin(), alive.end());
  std::vector<BoundingBox> alive_boxes;
  for (std::size_t i : alive) {
    alive_boxes.push_back(plan[i].next.box);
  }

  // (6) Candidate detections.
  std::vector<Detection> candidates;
  if (cfg_.mode == DetectionMode::public_detections) {
    if (input.detections && !input.detections->empty()) {
      std::vector<BoundingBox> boxes;
      for (const auto& d : *input.detections) {
        boxes.push_back(d.box);
      }
      const auto out = backend_.reg_and_class(t, boxes);
      for (std::size_t k = 0; k < boxes.size(); ++k) {
        candidates.push_back({out.boxes[k], out.scores[k]});
      }
    }
  } else {
    candidates = backend_.detect(t);
  }
  if (oc.reg && gt_cur != nullptr && !candidates.empty()) {
    std::vector<BoundingBox> boxes;
    for (const auto& c : candidates) {
      boxes.push_back(c.box);
    }
    const auto snapped = oracle_regress(boxes, *gt_cur);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      candidates[k].box = snapped[k];
    }
  }
  {
    std::vector<Detection> filtered;
    for (const auto& c : candidates) {
      if (c.score < cfg_.sigma_active) {
        continue;
      }
      if (const auto b = clip_box(c.box)) {
        filtered.push_back({*b, c.score});
      }
    }
    std::vector<Detection> kept;
    for (std::size_t k : nms(filtered, cfg_.lambda_new)) {
      kept.push_back(filtered[k]);
    }
    // (7) Drop candidates covering an object that is already tracked.
    candidates.clear();
    for (const auto& c : kept) {
      const bool covered = std::any_of(alive_boxes.begin(), alive_boxes.end(), [&](const auto& b) {
        return iou(c.box, b) > cfg_.lambda_new;
      });
      if (!covered) {
        candidates.push_back(c);
      }
    }
  }
  if (oc.kill && gt_cur != nullptr && !candidates.empty()) {
    // Births are judged like tracks: only candidates matching a GT object
    // that no surviving track already holds may start.
    const auto held = oracle_match(alive_boxes, *gt_cur);
    std::vector<GtEntry> free_gt;
    for (std::size_t g = 0; g < gt_cur->size(); ++g) {
      if (std::none_of(held.begin(), held.end(), [g](const auto& m) { return m && *m == g; })) {
        free_gt.push_back((*gt_cur)[g]);
      }
    }
    std::vector<BoundingBox> boxes;
    for (const auto& c : candidates) {
      boxes.push_back(c.box);
    }
    const auto match = oracle_match(boxes, free_gt);
    std::vector<Detection> kept;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (match[k]) {
        kept.push_back(candidates[k]);
      }
    }
    candidates = std::move(kept);
  }

  // (8) reID against the gallery, including tracks deactivated just now.
  std::vector<PoolItem> pool;
  if (use_reid_gallery) {
    for (std::size_t j = 0; j < gallery_.size(); ++j) {
      if (gallery_box[j]) {
        pool.push_back({true, j, {*gallery_box[j], gallery_[j].appearance}, gallery_[j].gt_id});
      }
    }
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (plan[i].fate == Fate::deactivate) {
        pool.push_back({false, i, {plan[i].predicted, mean_embedding(active_[i].embedding_history)},
                        plan[i].gt_id});
      }
    }
  }
  std::vector<ReidMatch> revivals;
  const bool embed = cfg_.enable_reid && embedder_ != nullptr;
  std::vector<Embedding> cand_emb;
  if (embed) {
    for (const auto& c : candidates) {
      cand_emb.push_back(embedder_->embed(t, c.box));
    }
  }
  if (!pool.empty() && !candidates.empty()) {
    if (oc.reid && gt_cur != nullptr) {
      std::vector<std::optional<TrackId>> ids;
      std::vector<BoundingBox> boxes;
      for (const auto& p : pool) {
        ids.push_back(p.gt_id);
      }
      for (const auto& c : candidates) {
        boxes.push_back(c.box);
      }
      revivals = oracle_reid(ids, boxes, *gt_cur);
    } else if (embed) {
      std::vector<ReidGalleryItem> items;
      for (const auto& p : pool) {
        items.push_back(p.reid);
      }
      revivals = try_reid(items, candidates, cand_emb, *embedder_,
                          cfg_.reid_distance_threshold, cfg_.reid_iou_gate);
    }
  }
  std::vector<std::optional<std::size_t>> revived_by(candidates.size());
  for (const auto& r : revivals) {
    revived_by[r.candidate] = r.gallery;
  }

  // Appearance of everything that will be active after this frame.
  std::vector<Embedding> alive_emb;
  if (embed) {
    for (std::size_t i : alive) {
      alive_emb.push_back(embedder_->embed(t, plan[i].next.box));
    }
  }

  // Commit. Nothing below may throw for reasons of input or backend.
  auto push_embedding = [&](Track& track, Embedding e) {
    if (!embed) {
      return;
    }
    track.embedding_history.push_back(std::move(e));
    while (track.embedding_history.size() > static_cast<std::size_t>(cfg_.embedding_history)) {
      track.embedding_history.pop_front();
    }
  };
  std::vector<Track> next_active;
  std::vector<GalleryEntry> next_gallery;
  std::vector<bool> pool_used(pool.size(), false);
  for (const auto& r : revivals) {
    pool_used[r.gallery] = true;
  }
  for (std::size_t k = 0; k < alive.size(); ++k) {
    Track& tr = active_[alive[k]];
    tr.boxes.push_back(plan[alive[k]].next);
    push_embedding(tr, embed ? alive_emb[k] : Embedding{});
    next_active.push_back(std::move(tr));
  }
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    Track tr;
    if (revived_by[c]) {
      const PoolItem& p = pool[*revived_by[c]];
      tr = p.from_gallery ? std::move(gallery_[p.index].track) : std::move(active_[p.index]);
      tr.state = TrackState::active;
      tr.inactive_since.reset();
      tr.last_unregressed_box.reset();
    } else {
      tr.id = next_id_++;
    }
    tr.boxes.push_back({t, candidates[c].box, candidates[c].score});
    push_embedding(tr, embed ? cand_emb[c] : Embedding{});
    next_active.push_back(std::move(tr));
  }
  for (std::size_t p = 0; p < pool.size(); ++p) {
    if (pool_used[p]) {
      continue;
    }
    if (pool[p].from_gallery) {
      GalleryEntry& g = gallery_[pool[p].index];
      g.box = pool[p].reid.box;
      next_gallery.push_back(std::move(g));
    } else {
      Track& tr = active_[pool[p].index];
      const Point2 v = cva_velocity(tr);
      tr.state = TrackState::inactive;
      tr.inactive_since = t;
      tr.last_unregressed_box = plan[pool[p].index].predicted;
      next_gallery.push_back(
          {std::move(tr), plan[pool[p].index].predicted, v, pool[p].reid.appearance, pool[p].gt_id});
    }
  }
  // Whatever was neither kept, revived nor galleried is finished.
  for (std::size_t j = 0; j < gallery_.size(); ++j) {
    if (!gallery_box[j] || !use_reid_gallery) {
      finished_.push_back(std::move(gallery_[j].track));
    }
  }
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const Fate f = plan[i].fate;
    if (f == Fate::lost || (f == Fate::deactivate && !use_reid_gallery)) {
      Track& tr = active_[i];
      tr.state = TrackState::inactive;
      tr.inactive_since = t;
      tr.last_unregressed_box = plan[i].predicted;
      finished_.push_back(std::move(tr));
    }
  }
  std::sort(next_active.begin(), next_active.end(),
            [](const Track& a, const Track& b) { return a.id < b.id; });
  active_ = std::move(next_active);
  gallery_ = std::move(next_gallery);
  last_frame_ = t;

  std::vector<ActiveBox> out;
  out.reserve(active_.size());
  for (const auto& tr : active_) {
    out.push_back({tr.id, tr.boxes.back().box, tr.boxes.back().score});
  }
  return out;
}

std::vector<Track> Tracker::finish() {
  for (auto& tr : active_) {
    finished_.push_back(std::move(tr));
  }
  for (auto& g : gallery_) {
    finished_.push_back(std::move(g.track));
  }
  active_.clear();
  gallery_.clear();
  std::vector<Track> out = std::move(finished_);
  finished_.clear();
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

RunResult run_tracker(const SequenceData& seq, const TrackerConfig& cfg,
                      RegressorClassifier& backend, EmbeddingProvider* embedder,
                      const RunOptions& options) {
  std::optional<OracleSettings> oracle;
  if (options.oracle.any()) {
    if (!seq.has_gt) {
      throw std::invalid_argument("oracle components need ground truth for " + seq.info.name);
    }
    oracle = OracleSettings{options.oracle, group_by_frame(filter_considered(seq.gt))};
  }
  Tracker tracker(cfg, backend, embedder, std::move(oracle));
  RunResult result;
  for (FrameIndex t = 1; t <= seq.info.length; ++t) {
    FrameInput in;
    in.frame = t;
    if (cfg.mode == DetectionMode::public_detections) {
      const auto it = seq.detections.find(t);
      in.detections = it == seq.detections.end() ? std::vector<Detection>{} : it->second;
    }
    if (cfg.enable_cmc && options.camera != nullptr && t > 1) {
      in.camera_motion = options.camera->motion(t);
    }
    tracker.step(in);
  }
  if (const auto* ecc = dynamic_cast<const EccCameraMotion*>(options.camera);
      ecc != nullptr && ecc->warning()) {
    result.warnings.push_back(*ecc->warning());
  }
  result.tracks = tracker.finish();
  if (options.oracle.inter) {
    for (auto& tr : result.tracks) {
      interpolate_gaps(tr);
    }
  }
  return result;
}

}  // namespace regtrack
