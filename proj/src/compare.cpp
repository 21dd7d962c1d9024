#include "psylex/compare.hpp"

#include "psylex/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace psylex {

double tucker(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "congruence needs equal-length vectors");
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "congruence needs non-empty vectors");
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::ZeroVector, "congruence with a zero vector");
  return sxy / std::sqrt(sxx * syy);
}

double tucker(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return tucker(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

Band band(double phi) {
  const double a = std::abs(phi);
  if (a >= 0.95) return Band::Identical;
  if (a >= 0.85) return Band::Fair;
  return Band::Dissimilar;
}

std::string_view to_string(Band b) {
  switch (b) {
    case Band::Identical: return "identical";
    case Band::Fair: return "fair";
    case Band::Dissimilar: return "dissimilar";
  }
  return "?";
}

CongruenceReport congruence_matrix(const LoadingMatrix& a, const LoadingMatrix& b,
                                   const std::optional<AlignmentMap>& align) {
  Eigen::MatrixXd la;
  Eigen::MatrixXd lb;
  if (align) {
    if (align->pairs.empty()) throw Error(ErrorCode::NoOverlap, "alignment has no shared terms");
    la = select_rows(a.values, align->left_indices());
    lb = select_rows(b.values, align->right_indices());
  } else {
    if (!a.terms.same_terms(b.terms)) {
      throw Error(ErrorCode::TermMismatch, "loading matrices differ in terms; supply an alignment");
    }
    la = a.values;
    lb = b.values;
  }
  if (la.rows() == 0) throw Error(ErrorCode::NoOverlap, "no shared terms");

  CongruenceReport r;
  r.shared_terms = static_cast<std::size_t>(la.rows());
  r.labels_a = a.component_labels.size() == static_cast<std::size_t>(a.values.cols()) ? a.component_labels
                                                                                      : default_component_labels(a.values.cols());
  r.labels_b = b.component_labels.size() == static_cast<std::size_t>(b.values.cols()) ? b.component_labels
                                                                                      : default_component_labels(b.values.cols());
  r.values.resize(la.cols(), lb.cols());
  r.bands.assign(static_cast<std::size_t>(la.cols()), std::vector<Band>(static_cast<std::size_t>(lb.cols())));
  for (Eigen::Index i = 0; i < la.cols(); ++i) {
    for (Eigen::Index j = 0; j < lb.cols(); ++j) {
      const double phi = tucker(Eigen::VectorXd(la.col(i)), Eigen::VectorXd(lb.col(j)));
      r.values(i, j) = phi;
      r.bands[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = band(phi);
    }
  }
  return r;
}

std::vector<BestMatch> best_matches(const CongruenceReport& r) {
  std::vector<BestMatch> cells;
  for (Eigen::Index i = 0; i < r.values.rows(); ++i)
    for (Eigen::Index j = 0; j < r.values.cols(); ++j)
      cells.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), r.values(i, j)});
  std::stable_sort(cells.begin(), cells.end(),
                   [](const BestMatch& x, const BestMatch& y) { return std::abs(x.phi) > std::abs(y.phi); });
  std::vector<bool> used_a(static_cast<std::size_t>(r.values.rows()), false);
  std::vector<bool> used_b(static_cast<std::size_t>(r.values.cols()), false);
  std::vector<BestMatch> out;
  for (const auto& c : cells) {
    if (used_a[c.a] || used_b[c.b]) continue;
    used_a[c.a] = used_b[c.b] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const BestMatch& x, const BestMatch& y) { return x.a < y.a; });
  return out;
}

void write_congruence(std::ostream& out, const CongruenceReport& r, int decimals, char delimiter) {
  char buf[48];
  out << "congruence";
  for (const auto& l : r.labels_b) out << delimiter << l;
  out << '\n';
  for (Eigen::Index i = 0; i < r.values.rows(); ++i) {
    out << r.labels_a[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
      if (decimals >= 17) {
        std::snprintf(buf, sizeof buf, "%.17g", r.values(i, j));
      } else {
        std::snprintf(buf, sizeof buf, "%.*f", decimals, r.values(i, j));
      }
      out << delimiter << buf;
    }
    out << '\n';
  }
  out << '\n' << "band";
  for (const auto& l : r.labels_b) out << delimiter << l;
  out << '\n';
  for (std::size_t i = 0; i < r.bands.size(); ++i) {
    out << r.labels_a[i];
    for (Band b : r.bands[i]) out << delimiter << to_string(b);
    out << '\n';
  }
}

}  // namespace psylex
