#pragma once

// Term-similarity structure: Pearson correlation matrices between terms,
// multi-source combination, significance and cross-source agreement.

#include "psylex/ingest.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psylex {

struct CorrelationMatrix {
  Eigen::MatrixXd values;            // T x T, symmetric, unit diagonal
  TermSet terms;
  std::optional<std::size_t> n_obs;  // observations behind each r, when meaningful

  std::size_t size() const { return terms.size(); }
};

/// Pearson correlation between the columns of `observations` (rows are
/// observations, columns are terms). Each pair is computed once with a fixed
/// summation order, so the result does not depend on `threads`
/// (0 = hardware concurrency).
CorrelationMatrix term_correlations(const Eigen::MatrixXd& observations, const TermSet& terms,
                                    unsigned threads = 0);
CorrelationMatrix term_correlations(const RatingsMatrix& ratings, unsigned threads = 0);
/// Feature dimensions act as observations.
CorrelationMatrix term_correlations(const EmbeddingMatrix& embeddings, unsigned threads = 0);

enum class CombineMode { Concat, FisherMean };

struct CombinedCorrelation {
  CorrelationMatrix matrix;
  std::size_t clamped_entries = 0;     // fisher_mean: |r| = 1 entries pulled inside (-1, 1)
  std::size_t constant_dims_dropped = 0;  // concat: dimensions with zero variance across terms
};

/// concat: standardize every feature dimension across terms, stack the
/// dimensions of all sources and correlate. fisher_mean: average the per-source
/// matrices on the atanh scale.
CombinedCorrelation combine_sources(std::span<const EmbeddingMatrix> sources,
                                    CombineMode mode = CombineMode::Concat, unsigned threads = 0);

struct MagnitudeStats {
  double mean_abs = 0.0;
  double median_abs = 0.0;
  std::size_t pairs = 0;
};

/// Mean and median |r| over the strict lower triangle.
MagnitudeStats magnitude_stats(const CorrelationMatrix& c);

inline std::size_t pair_count(std::size_t terms) { return terms * (terms - 1) / 2; }

/// Smallest |r| whose two-tailed p-value is below `alpha` with n observations.
double critical_r(std::size_t n, double alpha);

/// Two-tailed p-value of r with df = n - 2.
double p_value(double r, std::size_t n);

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// True where the correlation is significant at `alpha`. Requires n_obs >= 4.
BoolMatrix significance_mask(const CorrelationMatrix& c, double alpha);

/// Agreement in sign between a survey matrix `a` (which must carry n_obs)
/// and a second matrix `b` over the same terms.
struct ConsistencyReport {
  std::size_t total_pairs = 0;
  std::size_t significant_pairs = 0;
  std::size_t inconsistent_pairs = 0;
  double pct_same_sign = 0.0;
  double pct_inconsistent_nonsig = 0.0;  // share of inconsistent pairs not significant in a
  double pct_sig_flipped = 0.0;          // share of all pairs significant in a and flipped in b
  double congruence_over_sig = 0.0;      // uncentered, over a-significant entries
  double pearson_over_sig = 0.0;         // centered variant of the same comparison
  double alpha = 0.01;
};

ConsistencyReport directional_consistency(const CorrelationMatrix& a, const CorrelationMatrix& b,
                                          double alpha = 0.01);

struct ProfileReport {
  std::vector<double> per_term;  // r between term rows, self entry excluded
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double threshold = 0.60;
  double pct_ge = 0.0;
};

/// Second-order similarity: for each term, correlate its row in `a` with its row in `b`.
ProfileReport profile_correlations(const CorrelationMatrix& a, const CorrelationMatrix& b,
                                   double threshold = 0.60);

struct Neighbor {
  std::string term;
  double r = 0.0;
};

struct NeighborReport {
  std::string term;
  std::vector<Neighbor> nearest;   // descending r
  std::vector<Neighbor> furthest;  // ascending r
};

NeighborReport neighbors(const CorrelationMatrix& c, std::string_view term, std::size_t k);

/// Square table with a term header row and column, 17 significant digits.
/// The corner cell carries `n_obs=<N>` when known.
void write_correlation_matrix(std::ostream& out, const CorrelationMatrix& c, char delimiter = '\t');
CorrelationMatrix read_correlation_matrix(std::istream& in, char delimiter = '\t');

/// Pearson r of two equal-length vectors; NaN if either is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Summary helpers shared by the reports.
double mean_of(std::span<const double> v);
double median_of(std::vector<double> v);
double sample_sd(std::span<const double> v);

}  // namespace psylex
