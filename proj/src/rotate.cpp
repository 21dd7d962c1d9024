#include "psylex/rotate.hpp"

#include "psylex/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace psylex {

namespace {

// Gradient-projection form of the criterion: f = -1/4 sum_j sum_i (a_ij^2 - mean_j)^2,
// minimized; f = -(p/4) V. Returns f and writes d f / d L into `grad`.
double gp_objective(const Eigen::MatrixXd& l, Eigen::MatrixXd& grad) {
  const Eigen::ArrayXXd sq = l.array().square();
  const Eigen::RowVectorXd col_mean = sq.colwise().mean().matrix();
  const Eigen::ArrayXXd centered = sq.rowwise() - col_mean.array();
  grad = -(l.array() * centered).matrix();
  return -0.25 * centered.square().sum();
}

Eigen::MatrixXd polar_factor(const Eigen::MatrixXd& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

double varimax_criterion(const Eigen::MatrixXd& loadings) {
  const Eigen::ArrayXXd sq = loadings.array().square();
  const double p = static_cast<double>(loadings.rows());
  double v = 0.0;
  for (Eigen::Index j = 0; j < sq.cols(); ++j) {
    const double m2 = sq.col(j).sum() / p;
    const double m4 = sq.col(j).square().sum() / p;
    v += m4 - m2 * m2;
  }
  return v;
}

RotationResult varimax(const LoadingMatrix& a, const VarimaxOptions& opts) {
  const Eigen::Index p = a.values.rows();
  const Eigen::Index k = a.values.cols();
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "varimax needs at least 2 components");
  if (p < 1) throw Error(ErrorCode::InvalidArgument, "varimax needs at least one term");

  Eigen::VectorXd h = Eigen::VectorXd::Ones(p);
  if (opts.kaiser) {
    h = a.values.rowwise().norm();
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!(h(i) > 0.0)) {
        throw Error(ErrorCode::ZeroCommunality, "term '" + a.terms[static_cast<std::size_t>(i)] + "' has zero communality");
      }
    }
  }
  const Eigen::MatrixXd base = h.cwiseInverse().asDiagonal() * a.values;

  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd grad_l;
  double f = gp_objective(base, grad_l);
  Eigen::MatrixXd grad = base.transpose() * grad_l;

  RotationResult res;
  res.initial_criterion = varimax_criterion(base);
  res.criterion_trace.push_back(res.initial_criterion);
  const double to_criterion = 4.0 / static_cast<double>(p);  // V = -(4/p) f

  double step = 1.0;
  Eigen::MatrixXd cand_grad_l;
  while (res.iterations < opts.max_iter) {
    const Eigen::MatrixXd m = rot.transpose() * grad;
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    const Eigen::MatrixXd gp = grad - rot * sym;
    const double s = gp.norm();
    if (s < opts.tol) {
      res.converged = true;
      break;
    }

    step *= 2.0;
    bool improved = false;
    Eigen::MatrixXd cand;
    double f_cand = f;
    for (int halving = 0; halving <= 10; ++halving) {
      cand = polar_factor(rot - step * gp);
      f_cand = gp_objective(base * cand, cand_grad_l);
      if (f_cand < f - 0.5 * s * s * step) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // No ascent direction survives rounding: the criterion is at its numerical maximum.
      res.converged = true;
      break;
    }

    ++res.iterations;
    rot = cand;
    f = f_cand;
    grad = base.transpose() * cand_grad_l;
    res.criterion_trace.push_back(-f * to_criterion);
  }

  LoadingMatrix raw;
  raw.terms = a.terms;
  raw.rotated = true;
  raw.values = a.values * rot;
  raw.component_labels = default_component_labels(k);

  // Same sign and column order applied to the rotation, keeping rotated = a * rotation.
  const Eigen::VectorXd signs = orientation_signs(raw.values);
  const Eigen::MatrixXd flipped_rot = rot * signs.asDiagonal();
  const auto order = ssq_order(raw.values * signs.asDiagonal());
  res.rotation.resize(k, k);
  for (std::size_t j = 0; j < order.size(); ++j) res.rotation.col(static_cast<Eigen::Index>(j)) = flipped_rot.col(order[j]);

  res.rotated.terms = a.terms;
  res.rotated.rotated = true;
  res.rotated.values = a.values * res.rotation;
  res.rotated.component_labels = default_component_labels(k);
  res.criterion = varimax_criterion(base * res.rotation);
  return res;
}

Eigen::MatrixXd BassAckwardsResult::phi(std::size_t a, std::size_t b) const {
  if (a < 1 || b < 1 || a > levels.size() || b > levels.size()) {
    throw Error(ErrorCode::InvalidArgument, "level out of range");
  }
  const auto ia = static_cast<Eigen::Index>(a);
  const auto ib = static_cast<Eigen::Index>(b);
  const Eigen::MatrixXd cross = eigenvectors.leftCols(ia).transpose() * eigenvectors.leftCols(ib);
  const Eigen::VectorXd inv_sqrt_a = eigenvalues.head(ia).cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd sqrt_b = eigenvalues.head(ib).cwiseSqrt();
  return levels[a - 1].rotation.transpose() * inv_sqrt_a.asDiagonal() * cross * sqrt_b.asDiagonal() *
         levels[b - 1].rotation;
}

BassAckwardsResult bass_ackwards(const CorrelationMatrix& c, std::size_t max_levels, bool rotate_each_level,
                                 const VarimaxOptions& opts) {
  if (max_levels < 1 || max_levels > c.size()) {
    throw Error(ErrorCode::InvalidArgument, "max_levels must lie in [1, " + std::to_string(c.size()) + "]");
  }
  const PcaSolution sol = pca(c, max_levels);
  const auto top = static_cast<Eigen::Index>(max_levels);
  for (Eigen::Index i = 0; i < top; ++i) {
    if (sol.eigenvalues(i) < 1e-10) {
      throw Error(ErrorCode::NearZeroEigenvalue, "eigenvalue " + std::to_string(i + 1) + " is below 1e-10");
    }
  }

  BassAckwardsResult r;
  r.eigenvalues = sol.eigenvalues.head(top);
  r.eigenvectors = sol.eigenvectors.leftCols(top);
  for (std::size_t level = 1; level <= max_levels; ++level) {
    HierarchyLevel lv;
    lv.components = level;
    lv.loadings.terms = c.terms;
    lv.loadings.values = sol.loadings.values.leftCols(static_cast<Eigen::Index>(level));
    lv.loadings.component_labels = default_component_labels(static_cast<Eigen::Index>(level));
    lv.rotation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(level), static_cast<Eigen::Index>(level));
    if (rotate_each_level && level >= 2) {
      RotationResult rr = varimax(lv.loadings, opts);
      lv.loadings = std::move(rr.rotated);
      lv.rotation = std::move(rr.rotation);
    }
    r.levels.push_back(std::move(lv));
  }
  for (std::size_t level = 1; level < max_levels; ++level) {
    r.links.push_back({level, level + 1, r.phi(level, level + 1)});
  }
  return r;
}

void write_level_links(std::ostream& out, const BassAckwardsResult& r, char delimiter) {
  char buf[40];
  for (const auto& link : r.links) {
    out << "# level " << link.from << " -> " << link.to << '\n';
    out << "L" << link.from;
    for (std::size_t j = 0; j < link.to; ++j) out << delimiter << "L" << link.to << "." << (j + 1);
    out << '\n';
    for (Eigen::Index i = 0; i < link.phi.rows(); ++i) {
      out << "L" << link.from << "." << (i + 1);
      for (Eigen::Index j = 0; j < link.phi.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", link.phi(i, j));
        out << delimiter << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace psylex
