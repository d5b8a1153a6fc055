#include "regtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "regtrack/rng.hpp"

namespace regtrack {

namespace {

std::string describe(std::size_t index, const OcclusionEvent& e) {
  std::ostringstream os;
  os << "occlusion event #" << index << " (a=" << e.a << ", b=" << e.b << ", start=" << e.start
     << ", length=" << e.length << ')';
  return os.str();
}

FrameIndex event_end(const OcclusionEvent& e) { return e.start + e.length - 1; }

// Reflect x into [0, span] as if bouncing between the two walls.
double fold(double x, double span) {
  if (span <= 0.0) {
    return 0.0;
  }
  double r = std::fmod(x, 2.0 * span);
  if (r < 0.0) {
    r += 2.0 * span;
  }
  return r <= span ? r : 2.0 * span - r;
}

double blend_weight(FrameIndex t, const OcclusionEvent& e, int ramp) {
  const FrameIndex s = e.start;
  const FrameIndex end = event_end(e);
  if (t >= s && t <= end) {
    return 1.0;
  }
  if (ramp <= 0) {
    return 0.0;
  }
  if (t < s && t >= s - ramp) {
    return static_cast<double>(t - (s - ramp)) / ramp;
  }
  if (t > end && t <= end + ramp) {
    return 1.0 - static_cast<double>(t - end) / ramp;
  }
  return 0.0;
}

struct Lifetime {
  FrameIndex birth{1};
  FrameIndex death{1};
  bool alive(FrameIndex t) const { return t >= birth && t <= death; }
};

}  // namespace

void SynthConfig::validate() const {
  if (n_tracks < 0 || n_frames < 1) {
    throw std::invalid_argument("synth: need n_tracks >= 0 and n_frames >= 1");
  }
  if (frame_w < 2 || frame_h < 2) {
    throw std::invalid_argument("synth: frame must be at least 2x2");
  }
  if (!(speed_min >= 0.0) || !(speed_max >= speed_min)) {
    throw std::invalid_argument("synth: speeds must satisfy 0 <= speed_min <= speed_max");
  }
  if (!(size_min > 0.0) || !(size_max >= size_min) || !(aspect > 0.0)) {
    throw std::invalid_argument("synth: sizes and aspect must be positive, size_min <= size_max");
  }
  if (size_max >= frame_h || aspect * size_max >= frame_w) {
    throw std::invalid_argument("synth: boxes must fit inside the frame");
  }
  if (occlusion_ramp < 0) {
    throw std::invalid_argument("synth: occlusion_ramp must be >= 0");
  }
  if (!camera_path.empty()) {
    if (static_cast<int>(camera_path.size()) != n_frames) {
      throw std::invalid_argument("synth: camera_path needs one transform per frame");
    }
    for (const auto& t : camera_path) {
      if (!t.valid()) {
        throw std::invalid_argument("synth: camera_path holds an invalid transform");
      }
    }
  }
  if (max_pair_iou && !(*max_pair_iou >= 0.0 && *max_pair_iou <= 1.0)) {
    throw std::invalid_argument("synth: max_pair_iou must lie in [0,1]");
  }
  for (std::size_t i = 0; i < occlusion_events.size(); ++i) {
    const auto& e = occlusion_events[i];
    if (e.a < 1 || e.a > n_tracks || e.b < 1 || e.b > n_tracks) {
      throw InfeasibleConfigError(describe(i, e) + ": unknown track");
    }
    if (e.a == e.b) {
      throw InfeasibleConfigError(describe(i, e) + ": a track cannot occlude itself");
    }
    if (e.length < 1 || e.start < 1 || event_end(e) > n_frames) {
      throw InfeasibleConfigError(describe(i, e) + ": window outside [1, n_frames]");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = occlusion_events[j];
      const bool share = e.a == o.a || e.a == o.b || e.b == o.a || e.b == o.b;
      const bool overlap = e.start - occlusion_ramp <= event_end(o) + occlusion_ramp &&
                           o.start - occlusion_ramp <= event_end(e) + occlusion_ramp;
      if (share && overlap) {
        throw InfeasibleConfigError(describe(i, e) + ": overlaps " + describe(j, o) +
                                    " on a shared track");
      }
    }
  }
}

SmoothTexture::SmoothTexture(std::uint64_t seed, int waves, double min_period, double max_period) {
  KeyedRng rng(seed, {0x7e47});
  double total = 0.0;
  for (int i = 0; i < waves; ++i) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double period = rng.uniform(min_period, max_period);
    const double f = 2.0 * std::numbers::pi / period;
    const double amp = rng.uniform(0.5, 1.0);
    waves_.push_back({f * std::cos(angle), f * std::sin(angle),
                      rng.uniform(0.0, 2.0 * std::numbers::pi), amp});
    total += amp;
  }
  norm_ = total > 0.0 ? total : 1.0;
}

double SmoothTexture::operator()(double x, double y) const {
  double s = 0.0;
  for (const auto& w : waves_) {
    s += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
  }
  return std::clamp(0.5 + 0.5 * s / norm_, 0.0, 1.0);
}

GrayImage render_texture(const SmoothTexture& texture, int width, int height,
                         const Transform2D& world_to_image) {
  const Transform2D inv = world_to_image.is_exact_identity() ? world_to_image
                                                             : world_to_image.inverse();
  GrayImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point2 q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      img.at(x, y) = static_cast<float>(texture(q.x, q.y));
    }
  }
  return img;
}

double visible_fraction(const BoundingBox& box, std::span<const BoundingBox> occluders) {
  const double area = box.area();
  if (!(area > 0.0)) {
    return 0.0;
  }
  // Clip occluders to the box, then measure their union on the grid spanned
  // by all clipped edges.
  std::vector<BoundingBox> clipped;
  std::vector<double> xs{box.x, box.right()};
  std::vector<double> ys{box.y, box.bottom()};
  for (const auto& o : occluders) {
    const double x1 = std::max(box.x, o.x);
    const double y1 = std::max(box.y, o.y);
    const double x2 = std::min(box.right(), o.right());
    const double y2 = std::min(box.bottom(), o.bottom());
    if (x2 > x1 && y2 > y1) {
      clipped.push_back(BoundingBox::from_corners(x1, y1, x2, y2));
      xs.push_back(x1);
      xs.push_back(x2);
      ys.push_back(y1);
      ys.push_back(y2);
    }
  }
  if (clipped.empty()) {
    return 1.0;
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  double covered = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double cx = 0.5 * (xs[i] + xs[i + 1]);
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double cy = 0.5 * (ys[j] + ys[j + 1]);
      const bool in = std::any_of(clipped.begin(), clipped.end(), [&](const BoundingBox& c) {
        return cx > c.x && cx < c.right() && cy > c.y && cy < c.bottom();
      });
      if (in) {
        covered += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
      }
    }
  }
  return std::clamp(1.0 - covered / area, 0.0, 1.0);
}

std::map<FrameIndex, Transform2D> SynthSequence::camera_motion() const {
  std::map<FrameIndex, Transform2D> out;
  for (std::size_t i = 1; i < camera.size(); ++i) {
    out[static_cast<FrameIndex>(i) + 1] = camera[i - 1].inverse().then(camera[i]);
  }
  return out;
}

SynthSequence generate(const SynthConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_tracks;
  const int frames = cfg.n_frames;
  const double ww = cfg.frame_w;
  const double wh = cfg.frame_h;

  // Tracks touched by an event must live through it and its ramps.
  std::vector<std::pair<FrameIndex, FrameIndex>> required(n + 1, {frames + 1, 0});
  for (const auto& e : cfg.occlusion_events) {
    for (TrackId id : {e.a, e.b}) {
      auto& r = required[id];
      r.first = std::min(r.first, std::max(1, e.start - cfg.occlusion_ramp));
      r.second = std::max(r.second, std::min(frames, event_end(e) + cfg.occlusion_ramp));
    }
  }
  auto linked = [&cfg](TrackId i, TrackId j) {
    return std::any_of(cfg.occlusion_events.begin(), cfg.occlusion_events.end(),
                       [&](const OcclusionEvent& e) {
                         return (e.a == i && e.b == j) || (e.a == j && e.b == i);
                       });
  };

  std::vector<Lifetime> life(n + 1);
  std::vector<std::vector<BoundingBox>> boxes(n + 1);  // index t-1
  const int max_attempts = cfg.max_pair_iou ? 5000 : 1;
  for (TrackId k = 1; k <= n; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      KeyedRng rng(cfg.rng_seed, {1, static_cast<std::uint64_t>(k),
                                  static_cast<std::uint64_t>(attempt)});
      const double h = rng.uniform(cfg.size_min, cfg.size_max);
      const double w = cfg.aspect * h;
      Lifetime lt{1, frames};
      if (cfg.staggered_lifetimes && frames > 2) {
        const int min_len = std::max(2, frames / 3);
        lt.birth = static_cast<FrameIndex>(rng.uniform_int(1, frames - min_len + 1));
        lt.death = static_cast<FrameIndex>(rng.uniform_int(lt.birth + min_len - 1, frames));
      }
      if (required[k].second > 0) {
        lt.birth = std::min(lt.birth, required[k].first);
        lt.death = std::max(lt.death, required[k].second);
      }
      const double x0 = rng.uniform(0.0, ww - w);
      const double y0 = rng.uniform(0.0, wh - h);
      const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double vx = speed * std::cos(angle);
      const double vy = speed * std::sin(angle);
      std::vector<BoundingBox> traj(frames);
      for (FrameIndex t = lt.birth; t <= lt.death; ++t) {
        const double dt = t - lt.birth;
        traj[t - 1] = {fold(x0 + vx * dt, ww - w), fold(y0 + vy * dt, wh - h), w, h};
      }
      placed = true;
      if (cfg.max_pair_iou) {
        for (TrackId j = 1; j < k && placed; ++j) {
          if (linked(j, k)) {
            continue;
          }
          for (FrameIndex t = 1; t <= frames; ++t) {
            if (lt.alive(t) && life[j].alive(t) &&
                iou(traj[t - 1], boxes[j][t - 1]) > *cfg.max_pair_iou) {
              placed = false;
              break;
            }
          }
        }
      }
      if (placed) {
        life[k] = lt;
        boxes[k] = std::move(traj);
      }
    }
    if (!placed) {
      throw InfeasibleConfigError("synth: could not place track " + std::to_string(k) +
                                  " under max_pair_iou");
    }
  }

  // Occlusion events pull b onto a. Events never chain on a shared track at
  // overlapping times (validated), so a's boxes are final here.
  for (const auto& e : cfg.occlusion_events) {
    for (FrameIndex t = 1; t <= frames; ++t) {
      const double wgt = blend_weight(t, e, cfg.occlusion_ramp);
      if (wgt <= 0.0 || !life[e.b].alive(t)) {
        continue;
      }
      const BoundingBox& nb = boxes[e.b][t - 1];
      const Point2 cb = nb.center();
      const Point2 ca = boxes[e.a][t - 1].center();
      boxes[e.b][t - 1] =
          nb.recentered({cb.x + wgt * (ca.x - cb.x), cb.y + wgt * (ca.y - cb.y)});
    }
  }

  SynthSequence seq;
  seq.info.name = cfg.name;
  seq.info.frame_rate = 30.0;
  seq.info.width = cfg.frame_w;
  seq.info.height = cfg.frame_h;
  seq.info.length = frames;
  if (cfg.render_images) {
    seq.info.image_dir = "img1";
    seq.info.image_ext = ".pgm";
  }
  Transform2D cam = Transform2D::identity();
  for (FrameIndex t = 1; t <= frames; ++t) {
    if (!cfg.camera_path.empty()) {
      cam = t == 1 ? cfg.camera_path[0] : cam.then(cfg.camera_path[t - 1]);
    }
    seq.camera.push_back(cam);
  }

  for (FrameIndex t = 1; t <= frames; ++t) {
    std::vector<BoundingBox> nearer;
    for (TrackId k = 1; k <= n; ++k) {
      if (!life[k].alive(t)) {
        continue;
      }
      const BoundingBox& world = boxes[k][t - 1];
      seq.world_boxes[k][t] = world;
      const double vis = visible_fraction(world, nearer);
      nearer.push_back(world);
      const auto in_frame = clip_to_frame(warp_box(world, seq.camera[t - 1]), ww, wh);
      if (!in_frame) {
        continue;
      }
      seq.gt.push_back({t, k, *in_frame, 1, 1, vis});
    }
  }

  if (cfg.render_images) {
    const SmoothTexture background(mix64(cfg.rng_seed) ^ 0xb6);
    std::vector<SmoothTexture> patches;
    for (TrackId k = 0; k <= n; ++k) {
      patches.emplace_back(mix64(cfg.rng_seed ^ (0x9a7c + static_cast<std::uint64_t>(k))), 6, 6.0,
                           30.0);
    }
    for (FrameIndex t = 1; t <= frames; ++t) {
      const Transform2D& c = seq.camera[t - 1];
      const Transform2D inv = c.is_exact_identity() ? c : c.inverse();
      GrayImage img(cfg.frame_w, cfg.frame_h);
      for (int y = 0; y < cfg.frame_h; ++y) {
        for (int x = 0; x < cfg.frame_w; ++x) {
          const Point2 q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
          double v = -1.0;
          for (TrackId k = 1; k <= n && v < 0.0; ++k) {
            if (!life[k].alive(t)) {
              continue;
            }
            const BoundingBox& b = boxes[k][t - 1];
            if (q.x >= b.x && q.x < b.right() && q.y >= b.y && q.y < b.bottom()) {
              v = patches[k](q.x - b.x, q.y - b.y);
            }
          }
          img.at(x, y) = static_cast<float>(v < 0.0 ? background(q.x, q.y) : v);
        }
      }
      seq.images.push_back(std::move(img));
    }
  }
  return seq;
}

DetectionsByFrame derive_detections(std::span<const GtEntry> gt, const NoiseModel& noise) {
  noise.validate();
  DetectionsByFrame out;
  for (const auto& [frame, entries] : group_by_frame(gt)) {
    auto dets = sample_detections(entries, noise, frame);
    if (!dets.empty()) {
      out[frame] = std::move(dets);
    }
  }
  return out;
}

void write_sequence(const std::filesystem::path& dir, const SynthSequence& seq,
                    const DetectionsByFrame& detections) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "gt");
  fs::create_directories(dir / "det");
  auto open = [](const fs::path& p) {
    std::ofstream out(p);
    if (!out) {
      throw std::runtime_error("cannot write " + p.string());
    }
    return out;
  };
  {
    auto out = open(dir / "seqinfo.ini");
    write_sequence_info(seq.info, out);
  }
  {
    auto out = open(dir / "gt" / "gt.txt");
    write_ground_truth(seq.gt, out);
  }
  {
    auto out = open(dir / "det" / "det.txt");
    write_detections(detections, out);
  }
  if (!seq.images.empty()) {
    const fs::path img_dir = dir / seq.info.image_dir.value_or("img1");
    fs::create_directories(img_dir);
    for (std::size_t i = 0; i < seq.images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu", i + 1);
      save_pgm(seq.images[i], img_dir / (std::string(name) + seq.info.image_ext));
    }
  }
}

SequenceData to_sequence_data(const SynthSequence& seq, const DetectionsByFrame& detections) {
  SequenceData data;
  data.info = seq.info;
  data.gt = seq.gt;
  data.detections = detections;
  data.has_gt = true;
  data.has_detections = true;
  return data;
}

}  // namespace regtrack
