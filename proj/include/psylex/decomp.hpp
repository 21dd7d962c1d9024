#pragma once

// Principal components of a correlation matrix.

#include "psylex/ingest.hpp"
#include "psylex/simcore.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace psylex {

struct LoadingMatrix {
  Eigen::MatrixXd values;  // terms x components
  TermSet terms;
  bool rotated = false;
  std::vector<std::string> component_labels;

  Eigen::Index components() const { return values.cols(); }
};

struct PcaSolution {
  Eigen::VectorXd eigenvalues;   // all T, descending
  Eigen::MatrixXd eigenvectors;  // T x T, columns match eigenvalues
  std::size_t k = 0;
  LoadingMatrix loadings;        // T x k, V_k diag(sqrt(lambda_k))
  TermSet terms;
  std::vector<std::string> warnings;
};

/// Eigenvalues below zero but within this tolerance are treated as zero.
inline constexpr double kEigenClampTolerance = 1e-10;
/// Adjacent eigenvalues closer than this leave their components indeterminate.
inline constexpr double kEigenTieTolerance = 1e-8;

/// Throws NotPositiveSemidefinite if an eigenvalue is below -kEigenClampTolerance.
PcaSolution pca(const CorrelationMatrix& c, std::size_t k);

struct VarianceProportions {
  Eigen::VectorXd overall;          // share of total variance (T)
  Eigen::VectorXd among_extracted;  // share of the retained variance
};

VarianceProportions variance_proportions(const PcaSolution& s);
/// Rotated solutions: column sums of squared loadings take the place of eigenvalues.
VarianceProportions variance_proportions(const LoadingMatrix& a);

/// Sign of each column chosen so its largest-magnitude entry (earliest on ties) is positive.
Eigen::VectorXd orientation_signs(const Eigen::MatrixXd& m);

/// Column order by descending sum of squares; stable on ties.
std::vector<Eigen::Index> ssq_order(const Eigen::MatrixXd& m);

/// Applies the sign rule then the ordering rule. Labels follow their columns.
LoadingMatrix orient_components(const LoadingMatrix& a);

/// Column index of the largest |loading| in the row (earliest on ties).
Eigen::Index primary_component(const Eigen::MatrixXd& loadings, Eigen::Index row);

struct RankedTerm {
  std::size_t term = 0;
  double loading = 0.0;
};

/// For each component, the terms whose primary loading sits there, by
/// descending |loading|, at most `n` per component.
std::vector<std::vector<RankedTerm>> top_primary_terms(const LoadingMatrix& a, std::size_t n);

std::vector<std::string> default_component_labels(Eigen::Index k, const std::string& prefix = "PC");

enum class LoadingPrecision { Report, Machine };

/// Rows = terms, columns = components. Report: 6 decimals fixed; Machine: 17 significant digits.
void write_loadings(std::ostream& out, const LoadingMatrix& a,
                    LoadingPrecision precision = LoadingPrecision::Machine, char delimiter = '\t');
LoadingMatrix read_loadings(std::istream& in, char delimiter = '\t');

}  // namespace psylex
