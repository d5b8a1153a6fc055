#include "regtrack/embedding.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "regtrack/rng.hpp"

namespace regtrack {

double EmbeddingProvider::distance(const Embedding& u, const Embedding& v) const {
  return euclidean_distance(u, v);
}

double euclidean_distance(const Embedding& u, const Embedding& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("embedding dimensions differ: " + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    s += (u[i] - v[i]) * (u[i] - v[i]);
  }
  return std::sqrt(s);
}

Embedding mean_embedding(const std::deque<Embedding>& history) {
  if (history.empty()) {
    return {};
  }
  Embedding m(history.front().size(), 0.0);
  for (const auto& e : history) {
    if (e.size() != m.size()) {
      throw std::invalid_argument("embedding history mixes dimensions");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] += e[i];
    }
  }
  for (auto& v : m) {
    v /= static_cast<double>(history.size());
  }
  return m;
}

GtIdentityEmbedder::GtIdentityEmbedder(std::span<const GtEntry> gt, std::uint64_t seed, int dim,
                                       double scale)
    : gt_(group_by_frame(gt)), seed_(seed), dim_(dim), scale_(scale) {
  if (dim < 1 || !(scale > 0.0)) {
    throw std::invalid_argument("GtIdentityEmbedder: dim and scale must be positive");
  }
}

std::string GtIdentityEmbedder::identity() const {
  return "gt-identity(seed=" + std::to_string(seed_) + ",dim=" + std::to_string(dim_) + ')';
}

Embedding GtIdentityEmbedder::keyed_vector(std::uint64_t a, std::uint64_t b) const {
  KeyedRng rng(seed_, {a, b});
  Embedding v(static_cast<std::size_t>(dim_));
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.gaussian();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (auto& x : v) {
    x *= scale_ / norm;
  }
  return v;
}

Embedding GtIdentityEmbedder::identity_vector(TrackId id) const {
  return keyed_vector(1, static_cast<std::uint64_t>(id));
}

Embedding GtIdentityEmbedder::embed(FrameIndex frame, const BoundingBox& box) {
  const auto it = gt_.find(frame);
  if (it != gt_.end()) {
    const GtEntry* best = nullptr;
    double best_iou = 0.5;
    for (const auto& e : it->second) {
      const double v = iou(box, e.box);
      if (v >= best_iou) {
        best_iou = v;
        best = &e;
      }
    }
    if (best != nullptr) {
      return identity_vector(best->track_id);
    }
  }
  std::uint64_t h = mix64(static_cast<std::uint64_t>(frame));
  for (double c : {box.x, box.y, box.w, box.h}) {
    h = mix64(h ^ std::bit_cast<std::uint64_t>(c));
  }
  return keyed_vector(2, h);
}

}  // namespace regtrack
