#include "psylex/decomp.hpp"

#include "psylex/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace psylex {

PcaSolution pca(const CorrelationMatrix& c, std::size_t k) {
  const Eigen::Index t = c.values.rows();
  if (t == 0 || c.values.cols() != t) throw Error(ErrorCode::InvalidArgument, "pca needs a non-empty square matrix");
  if (k < 1 || k > static_cast<std::size_t>(t)) {
    throw Error(ErrorCode::InvalidArgument, "k must lie in [1, " + std::to_string(t) + "]");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c.values);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");

  PcaSolution s;
  s.terms = c.terms;
  s.k = k;
  // Eigen returns ascending order.
  s.eigenvalues = solver.eigenvalues().reverse();
  s.eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index i = 0; i < t; ++i) {
    double& lambda = s.eigenvalues(i);
    if (lambda < 0.0) {
      if (lambda < -kEigenClampTolerance) {
        throw Error(ErrorCode::NotPositiveSemidefinite,
                    "eigenvalue " + std::to_string(lambda) + " is below -1e-10; not a correlation matrix");
      }
      lambda = 0.0;
    }
  }
  const auto kk = static_cast<Eigen::Index>(k);
  for (Eigen::Index i = 0; i < std::min(kk, t - 1); ++i) {
    if (std::abs(s.eigenvalues(i) - s.eigenvalues(i + 1)) < kEigenTieTolerance) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "eigenvalues %ld and %ld are tied (%.12g); components are rotationally indeterminate",
                    static_cast<long>(i + 1), static_cast<long>(i + 2), s.eigenvalues(i));
      s.warnings.emplace_back(buf);
    }
  }

  // Orientation: signs only; the eigenvalue order already sorts by sum of squares.
  const Eigen::VectorXd signs = orientation_signs(s.eigenvectors);
  s.eigenvectors = s.eigenvectors * signs.asDiagonal();

  s.loadings.terms = c.terms;
  s.loadings.values = s.eigenvectors.leftCols(kk) * s.eigenvalues.head(kk).cwiseSqrt().asDiagonal();
  s.loadings.component_labels = default_component_labels(kk);
  return s;
}

VarianceProportions variance_proportions(const PcaSolution& s) {
  const auto kk = static_cast<Eigen::Index>(s.k);
  VarianceProportions v;
  const Eigen::VectorXd head = s.eigenvalues.head(kk);
  v.overall = head / static_cast<double>(s.eigenvalues.size());
  v.among_extracted = head / head.sum();
  return v;
}

VarianceProportions variance_proportions(const LoadingMatrix& a) {
  const Eigen::VectorXd ssq = a.values.colwise().squaredNorm().transpose();
  VarianceProportions v;
  v.overall = ssq / static_cast<double>(a.values.rows());
  v.among_extracted = ssq / ssq.sum();
  return v;
}

Eigen::VectorXd orientation_signs(const Eigen::MatrixXd& m) {
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double a = std::abs(m(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (m.rows() > 0 && m(best, j) < 0.0) signs(j) = -1.0;
  }
  return signs;
}

std::vector<Eigen::Index> ssq_order(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd ssq = m.colwise().squaredNorm().transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return ssq(x) > ssq(y); });
  return order;
}

LoadingMatrix orient_components(const LoadingMatrix& a) {
  const Eigen::VectorXd signs = orientation_signs(a.values);
  const Eigen::MatrixXd flipped = a.values * signs.asDiagonal();
  const auto order = ssq_order(flipped);

  LoadingMatrix out;
  out.terms = a.terms;
  out.rotated = a.rotated;
  out.values.resize(a.values.rows(), a.values.cols());
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.values.col(static_cast<Eigen::Index>(j)) = flipped.col(order[j]);
    if (a.component_labels.size() == order.size())
      out.component_labels.push_back(a.component_labels[static_cast<std::size_t>(order[j])]);
  }
  return out;
}

Eigen::Index primary_component(const Eigen::MatrixXd& loadings, Eigen::Index row) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) {
    const double v = std::abs(loadings(row, j));
    if (v > best_abs) {
      best_abs = v;
      best = j;
    }
  }
  return best;
}

std::vector<std::vector<RankedTerm>> top_primary_terms(const LoadingMatrix& a, std::size_t n) {
  std::vector<std::vector<RankedTerm>> groups(static_cast<std::size_t>(a.values.cols()));
  for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
    const auto p = primary_component(a.values, i);
    groups[static_cast<std::size_t>(p)].push_back({static_cast<std::size_t>(i), a.values(i, p)});
  }
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [](const RankedTerm& x, const RankedTerm& y) { return std::abs(x.loading) > std::abs(y.loading); });
    if (g.size() > n) g.resize(n);
  }
  return groups;
}

std::vector<std::string> default_component_labels(Eigen::Index k, const std::string& prefix) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) labels.push_back(prefix + std::to_string(j + 1));
  return labels;
}

void write_loadings(std::ostream& out, const LoadingMatrix& a, LoadingPrecision precision, char delimiter) {
  const auto labels = a.component_labels.size() == static_cast<std::size_t>(a.values.cols())
                          ? a.component_labels
                          : default_component_labels(a.values.cols());
  out << (a.rotated ? "rotated" : "unrotated");
  for (const auto& l : labels) out << delimiter << l;
  out << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
    out << a.terms[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < a.values.cols(); ++j) {
      if (precision == LoadingPrecision::Report) {
        std::snprintf(buf, sizeof buf, "%.6f", a.values(i, j));
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", a.values(i, j));
      }
      out << delimiter << buf;
    }
    out << '\n';
  }
}

LoadingMatrix read_loadings(std::istream& in, char delimiter) {
  auto split_line = [delimiter](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, delimiter)) cells.emplace_back(trim(cell));
    if (!line.empty() && line.back() == delimiter) cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingInput, "empty loadings table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = split_line(line);
  if (head.size() < 2) throw Error(ErrorCode::BadHeader, "loadings table has no component columns");

  LoadingMatrix a;
  a.rotated = head[0] == "rotated";
  a.component_labels.assign(head.begin() + 1, head.end());
  const auto k = static_cast<Eigen::Index>(a.component_labels.size());
  std::vector<std::string> terms;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != k + 1) {
      throw Error(ErrorCode::RaggedRow, "loadings row for '" + cells.front() + "'");
    }
    terms.push_back(cells[0]);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto v = parse_double(cells[static_cast<std::size_t>(j + 1)]);
      if (!v) throw Error(ErrorCode::MissingValue, "loadings row for '" + cells[0] + "'");
      if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, "loadings row for '" + cells[0] + "'");
      flat.push_back(*v);
    }
  }
  a.terms = TermSet(std::move(terms));
  const auto t = static_cast<Eigen::Index>(a.terms.size());
  a.values.resize(t, k);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < k; ++j) a.values(i, j) = flat[static_cast<std::size_t>(i * k + j)];
  return a;
}

}  // namespace psylex
