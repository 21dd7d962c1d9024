#pragma once

// Term orderings and heatmap rendering for correlation matrices.

#include "psylex/decomp.hpp"
#include "psylex/simcore.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace psylex {

struct TermOrder {
  enum class Method { Cluster, Loading, Identity };

  std::vector<std::size_t> permutation;  // display position -> term index
  Method method = Method::Identity;
  std::string parameters;
};

bool is_permutation_of_range(const std::vector<std::size_t>& p, std::size_t n);

/// Complete-linkage agglomerative clustering on d = 1 - r; leaves in dendrogram
/// order. Equal merge heights go to the pair with the smallest member indices,
/// and at each merge the subtree holding the smaller original index goes left.
TermOrder cluster_order(const CorrelationMatrix& c);

/// Terms grouped by primary component, groups in component order, each group
/// by descending |primary loading| (term order on ties).
TermOrder loading_order(const LoadingMatrix& a);

/// Rows and columns of `c` rearranged so position i holds term order[i].
CorrelationMatrix reorder(const CorrelationMatrix& c, const TermOrder& order);

using Rgb = std::array<std::uint8_t, 3>;

struct HeatmapSpec {
  std::size_t cell_px = 1;
  Rgb negative{178, 24, 43};
  Rgb midpoint{255, 255, 255};
  Rgb positive{33, 102, 172};
};

/// Linear blend from the midpoint toward the endpoint of r's sign, r clamped
/// to [-1, 1], channels rounded half away from zero.
Rgb heat_color(double r, const HeatmapSpec& spec);

/// Binary portable pixmap (P6), (T * cell_px) pixels square.
std::vector<std::uint8_t> render_heatmap(const CorrelationMatrix& c, const TermOrder& order,
                                         const HeatmapSpec& spec = {});

/// Same raster as SVG rectangles (one per cell).
std::string render_heatmap_svg(const CorrelationMatrix& c, const TermOrder& order,
                               const HeatmapSpec& spec = {});

/// Table of the top-n terms per component with all their loadings, 2 decimals.
void write_top_terms(std::ostream& out, const LoadingMatrix& a, std::size_t n, char delimiter = '\t');

}  // namespace psylex
