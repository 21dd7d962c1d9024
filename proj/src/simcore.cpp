#include "psylex/simcore.hpp"

#include "psylex/compare.hpp"
#include "psylex/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <thread>

namespace psylex {

namespace {

unsigned resolve_threads(unsigned threads, std::size_t work) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(work, 1)));
}

void require_same_terms(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  if (!a.terms.same_terms(b.terms)) {
    throw Error(ErrorCode::TermMismatch, "correlation matrices '" + a.terms.label() + "' and '" +
                                             b.terms.label() + "' differ in terms or order");
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split_cells(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

CorrelationMatrix term_correlations(const Eigen::MatrixXd& observations, const TermSet& terms,
                                    unsigned threads) {
  const Eigen::Index n = observations.rows();
  const Eigen::Index t = observations.cols();
  if (static_cast<std::size_t>(t) != terms.size()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(t) + " columns for " + std::to_string(terms.size()) + " terms");
  }
  if (n < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 observations, got " + std::to_string(n));

  // Columns scaled to zero mean and unit sum of squares, so r(i,j) is a dot product.
  Eigen::MatrixXd z(n, t);
  for (Eigen::Index j = 0; j < t; ++j) {
    const double mean = observations.col(j).sum() / static_cast<double>(n);
    z.col(j) = observations.col(j).array() - mean;
    const double ss = z.col(j).squaredNorm();
    if (!(ss > 0.0) || !std::isfinite(ss)) {
      throw Error(ErrorCode::DegenerateTerm, "constant column for term '" + terms[static_cast<std::size_t>(j)] + "'");
    }
    z.col(j) /= std::sqrt(ss);
  }

  CorrelationMatrix c;
  c.values.resize(t, t);
  c.terms = terms;
  c.n_obs = static_cast<std::size_t>(n);

  const unsigned workers = resolve_threads(threads, static_cast<std::size_t>(t));
  auto fill_rows = [&](unsigned w) {
    for (Eigen::Index i = w; i < t; i += workers) {
      c.values(i, i) = 1.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double r = std::clamp(z.col(i).dot(z.col(j)), -1.0, 1.0);
        c.values(i, j) = r;
        c.values(j, i) = r;
      }
    }
  };
  if (workers == 1) {
    fill_rows(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w);
  }
  return c;
}

CorrelationMatrix term_correlations(const RatingsMatrix& ratings, unsigned threads) {
  return term_correlations(ratings.values, ratings.terms, threads);
}

CorrelationMatrix term_correlations(const EmbeddingMatrix& embeddings, unsigned threads) {
  return term_correlations(embeddings.values.transpose(), embeddings.terms, threads);
}

CombinedCorrelation combine_sources(std::span<const EmbeddingMatrix> sources, CombineMode mode,
                                    unsigned threads) {
  if (sources.empty()) throw Error(ErrorCode::MissingInput, "combine_sources needs at least one source");
  const TermSet& terms = sources.front().terms;
  for (const auto& s : sources) {
    if (!s.terms.same_terms(terms)) {
      throw Error(ErrorCode::TermMismatch, "source '" + s.provenance.model_id + "/" + s.provenance.query_id +
                                               "' has a different term order");
    }
  }
  const auto t = static_cast<Eigen::Index>(terms.size());
  CombinedCorrelation out;

  if (mode == CombineMode::Concat) {
    Eigen::Index total = 0;
    for (const auto& s : sources) total += s.values.cols();
    Eigen::MatrixXd stacked(t, total);
    Eigen::Index used = 0;
    for (const auto& s : sources) {
      for (Eigen::Index d = 0; d < s.values.cols(); ++d) {
        const auto col = s.values.col(d);
        const double mean = col.sum() / static_cast<double>(t);
        const double ss = (col.array() - mean).square().sum();
        if (!(ss > 0.0)) {
          ++out.constant_dims_dropped;
          continue;
        }
        const double sd = std::sqrt(ss / static_cast<double>(t - 1));
        stacked.col(used++) = (col.array() - mean) / sd;
      }
    }
    out.matrix = term_correlations(stacked.leftCols(used).transpose(), terms, threads);
    return out;
  }

  std::vector<CorrelationMatrix> per_source;
  per_source.reserve(sources.size());
  for (const auto& s : sources) per_source.push_back(term_correlations(s, threads));

  constexpr double limit = 1.0 - 1e-12;
  out.matrix.terms = terms;
  out.matrix.values = Eigen::MatrixXd::Identity(t, t);
  std::vector<double> z(sources.size());
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      for (std::size_t s = 0; s < per_source.size(); ++s) {
        double r = per_source[s].values(i, j);
        if (std::abs(r) > limit) {
          r = std::copysign(limit, r);
          ++out.clamped_entries;
        }
        z[s] = std::atanh(r);
      }
      // Sorted summation makes the mean independent of source order.
      std::sort(z.begin(), z.end());
      const double avg = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
      const double r = std::tanh(avg);
      out.matrix.values(i, j) = r;
      out.matrix.values(j, i) = r;
    }
  }
  return out;
}

MagnitudeStats magnitude_stats(const CorrelationMatrix& c) {
  const auto t = c.values.rows();
  if (t < 2) throw Error(ErrorCode::InvalidArgument, "magnitude_stats needs at least 2 terms");
  std::vector<double> abs_vals;
  abs_vals.reserve(pair_count(static_cast<std::size_t>(t)));
  for (Eigen::Index i = 1; i < t; ++i)
    for (Eigen::Index j = 0; j < i; ++j) abs_vals.push_back(std::abs(c.values(i, j)));
  MagnitudeStats s;
  s.pairs = abs_vals.size();
  s.mean_abs = mean_of(abs_vals);
  s.median_abs = median_of(std::move(abs_vals));
  return s;
}

double critical_r(std::size_t n, double alpha) {
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "significance needs n >= 4");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const double df = static_cast<double>(n - 2);
  const boost::math::students_t dist(df);
  const double t = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
  return t / std::sqrt(t * t + df);
}

double p_value(double r, std::size_t n) {
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "significance needs n >= 4");
  const double a = std::abs(r);
  if (a >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = a * std::sqrt(df) / std::sqrt(1.0 - a * a);
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

BoolMatrix significance_mask(const CorrelationMatrix& c, double alpha) {
  if (!c.n_obs) throw Error(ErrorCode::MissingInput, "correlation matrix carries no observation count");
  const double crit = critical_r(*c.n_obs, alpha);
  return (c.values.array().abs() > crit).matrix();
}

ConsistencyReport directional_consistency(const CorrelationMatrix& a, const CorrelationMatrix& b,
                                          double alpha) {
  require_same_terms(a, b);
  if (!a.n_obs) throw Error(ErrorCode::MissingInput, "survey matrix carries no observation count");
  const double crit = critical_r(*a.n_obs, alpha);
  const auto t = a.values.rows();

  ConsistencyReport rep;
  rep.alpha = alpha;
  rep.total_pairs = pair_count(static_cast<std::size_t>(t));
  std::size_t same = 0;
  std::size_t inconsistent_nonsig = 0;
  std::size_t sig_flipped = 0;
  std::vector<double> sig_a;
  std::vector<double> sig_b;
  for (Eigen::Index i = 1; i < t; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double ra = a.values(i, j);
      const double rb = b.values(i, j);
      const bool consistent = !(ra * rb < 0.0);
      const bool sig = std::abs(ra) > crit;
      if (consistent) {
        ++same;
      } else if (!sig) {
        ++inconsistent_nonsig;
      }
      if (sig) {
        if (!consistent) ++sig_flipped;
        sig_a.push_back(ra);
        sig_b.push_back(rb);
      }
    }
  }
  const auto total = static_cast<double>(rep.total_pairs);
  rep.significant_pairs = sig_a.size();
  rep.inconsistent_pairs = rep.total_pairs - same;
  rep.pct_same_sign = total > 0 ? static_cast<double>(same) / total : 1.0;
  rep.pct_inconsistent_nonsig =
      rep.inconsistent_pairs > 0 ? static_cast<double>(inconsistent_nonsig) / static_cast<double>(rep.inconsistent_pairs) : 0.0;
  rep.pct_sig_flipped = total > 0 ? static_cast<double>(sig_flipped) / total : 0.0;
  if (sig_a.empty()) {
    rep.congruence_over_sig = std::numeric_limits<double>::quiet_NaN();
    rep.pearson_over_sig = std::numeric_limits<double>::quiet_NaN();
  } else {
    const bool b_zero = std::all_of(sig_b.begin(), sig_b.end(), [](double v) { return v == 0.0; });
    rep.congruence_over_sig = b_zero ? std::numeric_limits<double>::quiet_NaN() : tucker(sig_a, sig_b);
    rep.pearson_over_sig = sig_a.size() >= 2 ? pearson(sig_a, sig_b) : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

ProfileReport profile_correlations(const CorrelationMatrix& a, const CorrelationMatrix& b, double threshold) {
  require_same_terms(a, b);
  const auto t = a.values.rows();
  if (t < 3) throw Error(ErrorCode::InvalidArgument, "profile correlations need at least 3 terms");

  ProfileReport rep;
  rep.threshold = threshold;
  rep.per_term.reserve(static_cast<std::size_t>(t));
  std::vector<double> pa(static_cast<std::size_t>(t - 1));
  std::vector<double> pb(static_cast<std::size_t>(t - 1));
  std::size_t at_least = 0;
  for (Eigen::Index i = 0; i < t; ++i) {
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < t; ++j) {
      if (j == i) continue;
      pa[k] = a.values(i, j);
      pb[k] = b.values(i, j);
      ++k;
    }
    const double r = pearson(pa, pb);
    if (std::isnan(r)) {
      throw Error(ErrorCode::DegenerateTerm, "constant correlation profile for '" + a.terms[static_cast<std::size_t>(i)] + "'");
    }
    if (r >= threshold) ++at_least;
    rep.per_term.push_back(r);
  }
  rep.mean = mean_of(rep.per_term);
  rep.sd = sample_sd(rep.per_term);
  rep.median = median_of(rep.per_term);
  rep.pct_ge = static_cast<double>(at_least) / static_cast<double>(t);
  return rep;
}

NeighborReport neighbors(const CorrelationMatrix& c, std::string_view term, std::size_t k) {
  const auto idx = c.terms.find(term);
  if (!idx) throw Error(ErrorCode::UnknownTerm, "'" + std::string(term) + "' is not in the term set");
  const std::size_t t = c.size();
  if (k < 1 || k > t - 1) {
    throw Error(ErrorCode::InvalidArgument, "k must lie in [1, " + std::to_string(t - 1) + "]");
  }
  std::vector<std::size_t> others;
  others.reserve(t - 1);
  for (std::size_t j = 0; j < t; ++j)
    if (j != *idx) others.push_back(j);
  const auto row = static_cast<Eigen::Index>(*idx);
  auto r_of = [&](std::size_t j) { return c.values(row, static_cast<Eigen::Index>(j)); };

  NeighborReport rep;
  rep.term = c.terms[*idx];
  auto desc = others;
  std::stable_sort(desc.begin(), desc.end(), [&](std::size_t x, std::size_t y) { return r_of(x) > r_of(y); });
  auto asc = others;
  std::stable_sort(asc.begin(), asc.end(), [&](std::size_t x, std::size_t y) { return r_of(x) < r_of(y); });
  for (std::size_t i = 0; i < k; ++i) {
    rep.nearest.push_back({c.terms[desc[i]], r_of(desc[i])});
    rep.furthest.push_back({c.terms[asc[i]], r_of(asc[i])});
  }
  return rep;
}

void write_correlation_matrix(std::ostream& out, const CorrelationMatrix& c, char delimiter) {
  out << (c.n_obs ? "n_obs=" + std::to_string(*c.n_obs) : std::string("term"));
  for (const auto& t : c.terms.terms()) out << delimiter << t;
  out << '\n';
  for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
    out << c.terms[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < c.values.cols(); ++j) out << delimiter << fmt17(c.values(i, j));
    out << '\n';
  }
}

CorrelationMatrix read_correlation_matrix(std::istream& in, char delimiter) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingInput, "empty correlation table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = split_cells(line, delimiter);
  if (head.size() < 2) throw Error(ErrorCode::BadHeader, "correlation table header has no terms");

  CorrelationMatrix c;
  const std::string_view corner = trim(head[0]);
  if (corner.starts_with("n_obs=")) {
    const auto n = parse_double(corner.substr(6));
    if (!n || *n < 0 || std::floor(*n) != *n) throw Error(ErrorCode::BadHeader, "bad n_obs in corner cell");
    c.n_obs = static_cast<std::size_t>(*n);
  }
  std::vector<std::string> terms;
  for (std::size_t j = 1; j < head.size(); ++j) terms.emplace_back(trim(head[j]));
  c.terms = TermSet(std::move(terms));
  const auto t = static_cast<Eigen::Index>(c.terms.size());
  c.values.resize(t, t);

  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (row >= t) throw Error(ErrorCode::CountMismatch, "more rows than terms in correlation table");
    const auto cells = split_cells(line, delimiter);
    if (static_cast<Eigen::Index>(cells.size()) != t + 1) throw Error(ErrorCode::RaggedRow, "row " + std::to_string(row));
    if (fold_case(trim(cells[0])) != fold_case(c.terms[static_cast<std::size_t>(row)])) {
      throw Error(ErrorCode::TermMismatch, "row label '" + std::string(cells[0]) + "' does not match header");
    }
    for (Eigen::Index j = 0; j < t; ++j) {
      const auto v = parse_double(trim(cells[static_cast<std::size_t>(j + 1)]));
      if (!v) throw Error(ErrorCode::MissingValue, "row " + std::to_string(row) + " column " + std::to_string(j));
      if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(row));
      c.values(row, j) = *v;
    }
    ++row;
  }
  if (row != t) throw Error(ErrorCode::CountMismatch, "correlation table is not square");
  for (Eigen::Index i = 0; i < t; ++i) {
    if (c.values(i, i) != 1.0) throw Error(ErrorCode::InvalidArgument, "diagonal entry " + std::to_string(i) + " is not 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(c.values(i, j) - c.values(j, i)) > 1e-12 || std::abs(c.values(i, j)) > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "table is not a valid correlation matrix at (" +
                                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  return c;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "pearson needs two equal-length vectors");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace psylex
