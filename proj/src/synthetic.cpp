#include "psylex/synthetic.hpp"

#include "psylex/error.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace psylex {

EmbeddingMatrix planted_embeddings(const PlantedSpec& spec) {
  if (spec.clusters == 0 || spec.terms_per_cluster == 0) throw Error(ErrorCode::InvalidArgument, "empty planted design");
  if (spec.dims <= spec.clusters) throw Error(ErrorCode::InvalidArgument, "dims must exceed the cluster count");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.dims);
  const auto k = static_cast<Eigen::Index>(spec.clusters);

  Eigen::MatrixXd g(d, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = gauss(rng);
  g.rowwise() -= g.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd directions =
      (qr.householderQ() * Eigen::MatrixXd::Identity(d, k)) * std::sqrt(static_cast<double>(spec.dims));

  const std::size_t t = spec.clusters * spec.terms_per_cluster;
  EmbeddingMatrix e;
  e.values.resize(static_cast<Eigen::Index>(t), d);
  std::vector<std::string> names;
  names.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t c = i / spec.terms_per_cluster;
    names.push_back("c" + std::to_string(c) + "_t" + std::to_string(i));
    for (Eigen::Index j = 0; j < d; ++j) {
      e.values(static_cast<Eigen::Index>(i), j) = directions(j, static_cast<Eigen::Index>(c)) + spec.noise_sd * gauss(rng);
    }
  }
  e.terms = TermSet(std::move(names), "planted");
  e.provenance = {"planted", "seed" + std::to_string(spec.seed), "synthetic"};
  return e;
}

}  // namespace psylex
