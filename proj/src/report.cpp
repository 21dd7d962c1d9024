#include "psylex/report.hpp"

#include "psylex/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <tuple>

namespace psylex {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Node {
  std::size_t left = kNone;   // child node ids, kNone for leaves
  std::size_t right = kNone;
  std::size_t leaf = kNone;
  std::size_t min_index = 0;
};

}  // namespace

bool is_permutation_of_range(const std::vector<std::size_t>& p, std::size_t n) {
  if (p.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (auto i : p) {
    if (i >= n || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

TermOrder cluster_order(const CorrelationMatrix& c) {
  const std::size_t t = c.size();
  if (t < 2) throw Error(ErrorCode::InvalidArgument, "clustering needs at least 2 terms");

  // Slot s holds the active cluster whose smallest member index is s.
  Eigen::MatrixXd dist = 1.0 - c.values.array();
  std::vector<bool> active(t, true);
  std::vector<std::size_t> node_of(t);
  std::vector<Node> nodes;
  nodes.reserve(2 * t - 1);
  for (std::size_t i = 0; i < t; ++i) {
    nodes.push_back({kNone, kNone, i, i});
    node_of[i] = i;
  }

  // nn[i]: best partner j > i among active slots.
  std::vector<std::size_t> nn(t, kNone);
  auto d = [&](std::size_t i, std::size_t j) { return dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); };
  auto refresh = [&](std::size_t i) {
    nn[i] = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = i + 1; j < t; ++j) {
      if (!active[j]) continue;
      if (d(i, j) < best) {
        best = d(i, j);
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < t; ++i) refresh(i);

  for (std::size_t merges = 0; merges + 1 < t; ++merges) {
    std::size_t p = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t; ++i) {
      if (!active[i] || nn[i] == kNone) continue;
      if (d(i, nn[i]) < best) {
        best = d(i, nn[i]);
        p = i;
      }
    }
    const std::size_t q = nn[p];

    nodes.push_back({node_of[p], node_of[q], kNone, p});
    node_of[p] = nodes.size() - 1;
    active[q] = false;
    for (std::size_t k = 0; k < t; ++k) {
      if (!active[k] || k == p) continue;
      const double m = std::max(d(p, k), d(q, k));
      dist(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = m;
      dist(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) = m;
    }
    refresh(p);
    for (std::size_t i = 0; i < p; ++i) {
      if (active[i] && (nn[i] == p || nn[i] == q)) refresh(i);
    }
    for (std::size_t i = p + 1; i < q; ++i) {
      if (active[i] && nn[i] == q) refresh(i);
    }
  }

  TermOrder order;
  order.method = TermOrder::Method::Cluster;
  order.parameters = "linkage=complete distance=1-r";
  order.permutation.reserve(t);
  std::vector<std::size_t> stack{nodes.size() - 1};
  while (!stack.empty()) {
    const Node& n = nodes[stack.back()];
    stack.pop_back();
    if (n.leaf != kNone) {
      order.permutation.push_back(n.leaf);
      continue;
    }
    std::size_t first = n.left;
    std::size_t second = n.right;
    if (nodes[second].min_index < nodes[first].min_index) std::swap(first, second);
    stack.push_back(second);
    stack.push_back(first);
  }
  return order;
}

TermOrder loading_order(const LoadingMatrix& a) {
  const auto t = static_cast<std::size_t>(a.values.rows());
  std::vector<std::tuple<Eigen::Index, double, std::size_t>> keys;
  keys.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto p = primary_component(a.values, row);
    keys.emplace_back(p, std::abs(a.values(row, p)), i);
  }
  std::stable_sort(keys.begin(), keys.end(), [](const auto& x, const auto& y) {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) < std::get<0>(y);
    return std::get<1>(x) > std::get<1>(y);
  });
  TermOrder order;
  order.method = TermOrder::Method::Loading;
  order.parameters = "components=" + std::to_string(a.values.cols());
  for (const auto& k : keys) order.permutation.push_back(std::get<2>(k));
  return order;
}

CorrelationMatrix reorder(const CorrelationMatrix& c, const TermOrder& order) {
  if (!is_permutation_of_range(order.permutation, c.size())) {
    throw Error(ErrorCode::InvalidArgument, "order is not a permutation of the terms");
  }
  const auto t = static_cast<Eigen::Index>(c.size());
  CorrelationMatrix out;
  out.n_obs = c.n_obs;
  out.terms = select_terms(c.terms, order.permutation);
  out.values.resize(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      out.values(i, j) = c.values(static_cast<Eigen::Index>(order.permutation[static_cast<std::size_t>(i)]),
                                  static_cast<Eigen::Index>(order.permutation[static_cast<std::size_t>(j)]));
  return out;
}

Rgb heat_color(double r, const HeatmapSpec& spec) {
  if (std::isnan(r)) return spec.midpoint;
  r = std::clamp(r, -1.0, 1.0);
  const Rgb& end = r >= 0.0 ? spec.positive : spec.negative;
  const double w = std::abs(r);
  Rgb out{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double v = spec.midpoint[ch] + w * (static_cast<double>(end[ch]) - spec.midpoint[ch]);
    out[ch] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

std::vector<std::uint8_t> render_heatmap(const CorrelationMatrix& c, const TermOrder& order, const HeatmapSpec& spec) {
  if (spec.cell_px == 0) throw Error(ErrorCode::InvalidArgument, "cell_px must be positive");
  if (!is_permutation_of_range(order.permutation, c.size())) {
    throw Error(ErrorCode::InvalidArgument, "order is not a permutation of the terms");
  }
  const std::size_t side = c.size() * spec.cell_px;
  const std::string header = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + side * side * 3);
  std::vector<std::uint8_t> line(side * 3);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto ri = static_cast<Eigen::Index>(order.permutation[i]);
    for (std::size_t j = 0; j < c.size(); ++j) {
      const Rgb px = heat_color(c.values(ri, static_cast<Eigen::Index>(order.permutation[j])), spec);
      for (std::size_t x = 0; x < spec.cell_px; ++x) {
        std::copy(px.begin(), px.end(), line.begin() + static_cast<std::ptrdiff_t>((j * spec.cell_px + x) * 3));
      }
    }
    for (std::size_t y = 0; y < spec.cell_px; ++y) bytes.insert(bytes.end(), line.begin(), line.end());
  }
  return bytes;
}

std::string render_heatmap_svg(const CorrelationMatrix& c, const TermOrder& order, const HeatmapSpec& spec) {
  if (!is_permutation_of_range(order.permutation, c.size())) {
    throw Error(ErrorCode::InvalidArgument, "order is not a permutation of the terms");
  }
  const std::size_t px = spec.cell_px == 0 ? 1 : spec.cell_px;
  const std::size_t side = c.size() * px;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(side) + "\" height=\"" +
                    std::to_string(side) + "\" shape-rendering=\"crispEdges\">\n";
  char buf[128];
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      const Rgb col = heat_color(c.values(static_cast<Eigen::Index>(order.permutation[i]),
                                          static_cast<Eigen::Index>(order.permutation[j])),
                                 spec);
      std::snprintf(buf, sizeof buf, "<rect x=\"%zu\" y=\"%zu\" width=\"%zu\" height=\"%zu\" fill=\"#%02x%02x%02x\"/>\n",
                    j * px, i * px, px, px, col[0], col[1], col[2]);
      svg += buf;
    }
  }
  svg += "</svg>\n";
  return svg;
}

void write_top_terms(std::ostream& out, const LoadingMatrix& a, std::size_t n, char delimiter) {
  const auto labels = a.component_labels.size() == static_cast<std::size_t>(a.values.cols())
                          ? a.component_labels
                          : default_component_labels(a.values.cols());
  const auto groups = top_primary_terms(a, n);
  char buf[32];
  out << "term" << delimiter << "primary";
  for (const auto& l : labels) out << delimiter << l;
  out << '\n';
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& rt : groups[g]) {
      out << a.terms[rt.term] << delimiter << labels[g];
      for (Eigen::Index j = 0; j < a.values.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.2f", a.values(static_cast<Eigen::Index>(rt.term), j));
        out << delimiter << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace psylex
