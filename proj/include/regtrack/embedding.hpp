#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>

#include "regtrack/core.hpp"
#include "regtrack/motio.hpp"
#include "regtrack/track.hpp"

namespace regtrack {

/// Appearance model used by short-term reID.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual Embedding embed(FrameIndex frame, const BoundingBox& box) = 0;
  /// Euclidean unless overridden. Must be symmetric with distance(u, u) = 0.
  virtual double distance(const Embedding& u, const Embedding& v) const;
  virtual std::string identity() const = 0;
};

/// Throws std::invalid_argument on dimension mismatch.
double euclidean_distance(const Embedding& u, const Embedding& v);

/// Element-wise mean; empty for an empty history.
Embedding mean_embedding(const std::deque<Embedding>& history);

/// Perfect appearance model for synthetic data: a box overlapping a GT box at
/// IoU >= 0.5 (best overlap wins) embeds to that identity's fixed vector, a
/// random direction of length `scale`. Other boxes get a vector derived from
/// their coordinates, so they sit far from every identity.
class GtIdentityEmbedder final : public EmbeddingProvider {
 public:
  GtIdentityEmbedder(std::span<const GtEntry> gt, std::uint64_t seed = 0, int dim = 32,
                     double scale = 10.0);

  Embedding embed(FrameIndex frame, const BoundingBox& box) override;
  std::string identity() const override;

  Embedding identity_vector(TrackId id) const;

 private:
  Embedding keyed_vector(std::uint64_t a, std::uint64_t b) const;

  GtByFrame gt_;
  std::uint64_t seed_;
  int dim_;
  double scale_;
};

}  // namespace regtrack
