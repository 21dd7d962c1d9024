#pragma once

// Tucker congruence between component solutions.

#include "psylex/decomp.hpp"
#include "psylex/ingest.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psylex {

/// Uncentered cosine sum(x*y) / sqrt(sum(x^2) * sum(y^2)).
double tucker(std::span<const double> x, std::span<const double> y);
double tucker(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

enum class Band { Identical, Fair, Dissimilar };

/// |phi| >= .95 identical, .85 <= |phi| < .95 fair, otherwise dissimilar.
Band band(double phi);
std::string_view to_string(Band b);

struct CongruenceReport {
  Eigen::MatrixXd values;  // components of a x components of b
  std::vector<std::string> labels_a;
  std::vector<std::string> labels_b;
  std::vector<std::vector<Band>> bands;
  std::size_t shared_terms = 0;
};

/// Congruence for every column pair. With an alignment, each solution keeps
/// its own full-set loadings and only the shared rows enter the coefficient.
CongruenceReport congruence_matrix(const LoadingMatrix& a, const LoadingMatrix& b,
                                   const std::optional<AlignmentMap>& align = std::nullopt);

struct BestMatch {
  std::size_t a = 0;
  std::size_t b = 0;
  double phi = 0.0;
};

/// Greedy one-to-one matching by descending |phi|; a reading aid, not used in core results.
std::vector<BestMatch> best_matches(const CongruenceReport& r);

/// Labeled value table (two decimals for display or 17 digits), then a band table.
void write_congruence(std::ostream& out, const CongruenceReport& r, int decimals = 17, char delimiter = '\t');

}  // namespace psylex
