#include "oracles.hpp"

#include <cmath>
#include <numbers>

namespace oracle {

namespace {

double t_density(double x, double df) {
  const double log_norm = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) - 0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

}  // namespace

double t_two_tailed_p(double t, double df) {
  t = std::abs(t);
  // P(|T| < t) = 2 * integral_0^t density; even number of Simpson panels.
  const int panels = 20000;
  const double h = t / panels;
  double sum = t_density(0.0, df) + t_density(t, df);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * t_density(i * h, df);
  const double inner = 2.0 * sum * h / 3.0;
  return 1.0 - inner;
}

double critical_r(std::size_t n, double alpha) {
  const double df = static_cast<double>(n) - 2.0;
  auto p_of_r = [&](double r) { return t_two_tailed_p(r * std::sqrt(df) / std::sqrt(1.0 - r * r), df); };
  double lo = 0.0;
  double hi = 0.999;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (p_of_r(mid) < alpha) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

double varimax_value(const Eigen::MatrixXd& a) {
  const double p = static_cast<double>(a.rows());
  double total = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double s2 = 0.0;
    double s4 = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double sq = a(i, j) * a(i, j);
      s2 += sq;
      s4 += sq * sq;
    }
    total += s4 / p - (s2 / p) * (s2 / p);
  }
  return total;
}

GridOptimum varimax_grid_search(const Eigen::MatrixXd& a, bool kaiser, double step_deg) {
  Eigen::MatrixXd base = a;
  if (kaiser) {
    for (Eigen::Index i = 0; i < base.rows(); ++i) base.row(i) /= base.row(i).norm();
  }
  GridOptimum best{-1.0, 0.0};
  const long steps = std::lround(90.0 / step_deg);
  for (long s = 0; s < steps; ++s) {
    const double deg = s * step_deg;
    const double th = deg * std::numbers::pi / 180.0;
    Eigen::Matrix2d rot;
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const double v = varimax_value(base * rot);
    if (v > best.criterion) best = {v, deg};
  }
  return best;
}

Eigen::MatrixXd column_correlations(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd out(x.cols(), y.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Eigen::VectorXd xi = x.col(i).array() - x.col(i).mean();
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const Eigen::VectorXd yj = y.col(j).array() - y.col(j).mean();
      out(i, j) = xi.dot(yj) / std::sqrt(xi.squaredNorm() * yj.squaredNorm());
    }
  }
  return out;
}

Eigen::MatrixXd correlation_of(const Eigen::MatrixXd& data) {
  Eigen::MatrixXd c = column_correlations(data, data);
  c.diagonal().setOnes();
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd component_scores(const Eigen::MatrixXd& data, const Eigen::MatrixXd& loadings) {
  Eigen::MatrixXd z = data.rowwise() - data.colwise().mean();
  for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) /= std::sqrt(z.col(j).squaredNorm() / (z.rows() - 1.0));
  const Eigen::MatrixXd r = correlation_of(data);
  const Eigen::MatrixXd weights = r.ldlt().solve(loadings);
  return z * weights;
}

Eigen::MatrixXd factor_data(std::size_t n, std::size_t t, std::size_t factors, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto nn = static_cast<Eigen::Index>(n);
  const auto tt = static_cast<Eigen::Index>(t);
  const auto ff = static_cast<Eigen::Index>(factors);
  Eigen::MatrixXd f(nn, ff);
  Eigen::MatrixXd w(ff, tt);
  Eigen::MatrixXd x(nn, tt);
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < ff; ++j) f(i, j) = g(rng);
  for (Eigen::Index i = 0; i < ff; ++i)
    for (Eigen::Index j = 0; j < tt; ++j) w(i, j) = u(rng);
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < tt; ++j) x(i, j) = g(rng);
  return f * w + x;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

}  // namespace oracle
