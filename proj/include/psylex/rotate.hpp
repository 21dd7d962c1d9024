#pragma once

// Orthogonal varimax rotation by gradient projection, and the
// bass-ackwards hierarchy of component solutions.

#include "psylex/decomp.hpp"
#include "psylex/simcore.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace psylex {

struct VarimaxOptions {
  bool kaiser = true;  // row-normalize by sqrt(communality) while rotating
  double tol = 1e-8;  // on the norm of the projected gradient
  std::size_t max_iter = 1000;
};

struct RotationResult {
  LoadingMatrix rotated;     // unrotated * rotation
  Eigen::MatrixXd rotation;  // k x k orthogonal
  double criterion = 0.0;    // varimax criterion of the (normalized) rotated loadings
  double initial_criterion = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> criterion_trace;  // after each accepted step, starting with the initial value
};

/// V(A) = sum_j [ mean_i a_ij^4 - (mean_i a_ij^2)^2 ].
double varimax_criterion(const Eigen::MatrixXd& loadings);

/// Maximizes the varimax criterion over orthogonal rotations. The result is
/// passed through orient_components and `rotation` is permuted/flipped to match.
RotationResult varimax(const LoadingMatrix& a, const VarimaxOptions& opts = {});

struct HierarchyLevel {
  std::size_t components = 0;
  LoadingMatrix loadings;    // level solution (rotated when requested and k >= 2)
  Eigen::MatrixXd rotation;  // identity when unrotated
};

struct LevelLink {
  std::size_t from = 0;  // components at the upper level
  std::size_t to = 0;    // components at the lower level
  Eigen::MatrixXd phi;   // from x to component-score correlations
};

struct BassAckwardsResult {
  std::vector<HierarchyLevel> levels;  // levels[k-1] holds the k-component solution
  std::vector<LevelLink> links;        // adjacent pairs 1->2, 2->3, ...
  Eigen::VectorXd eigenvalues;         // top max_levels
  Eigen::MatrixXd eigenvectors;        // T x max_levels

  /// Score correlations between any two levels (1-based component counts).
  Eigen::MatrixXd phi(std::size_t a, std::size_t b) const;
};

/// Extracts the 1..max_levels component solutions from one eigendecomposition
/// and correlates component scores across adjacent levels analytically.
BassAckwardsResult bass_ackwards(const CorrelationMatrix& c, std::size_t max_levels,
                                 bool rotate_each_level = true, const VarimaxOptions& opts = {});

/// Each link as a labeled block: `# level a -> b` followed by a table.
void write_level_links(std::ostream& out, const BassAckwardsResult& r, char delimiter = '\t');

}  // namespace psylex
