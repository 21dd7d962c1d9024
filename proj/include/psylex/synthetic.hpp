#pragma once

// Planted-structure embeddings for demos and tests.

#include "psylex/ingest.hpp"

#include <cstddef>
#include <cstdint>

namespace psylex {

struct PlantedSpec {
  std::size_t clusters = 3;
  std::size_t terms_per_cluster = 20;
  std::size_t dims = 256;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;
};

/// Term i belongs to cluster i / terms_per_cluster. Each cluster has a
/// zero-mean direction, mutually orthogonal and scaled to unit RMS per
/// dimension; every term is its cluster direction plus N(0, noise_sd^2) noise.
/// Terms are named "c<cluster>_t<index>".
EmbeddingMatrix planted_embeddings(const PlantedSpec& spec);

}  // namespace psylex
