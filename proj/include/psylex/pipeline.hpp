#pragma once

// End-to-end run: ingest, correlations, components, rotation, comparison,
// orderings and heatmaps written to an output directory with a manifest.

#include "psylex/error.hpp"
#include "psylex/rotate.hpp"
#include "psylex/simcore.hpp"
#include "psylex/synthetic.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psylex {

/// An Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "[" + stage + "] " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  struct Ratings {
    std::filesystem::path path;
    char delimiter = ',';
    bool ipsatize = false;
  };
  struct Embeddings {
    std::vector<std::filesystem::path> paths;
    CombineMode combine = CombineMode::Concat;
  };

  std::optional<Ratings> ratings;
  std::optional<Embeddings> embeddings;
  std::optional<PlantedSpec> synthetic;       // stands in for embeddings when set
  std::optional<std::filesystem::path> terms;  // restrict every source to this list
  std::size_t components = 5;
  VarimaxOptions rotation;
  std::size_t bass_ackwards_levels = 5;
  bool bass_ackwards_rotate = true;
  double alpha = 0.01;
  double profile_threshold = 0.60;
  std::vector<std::string> neighbor_terms;
  std::size_t neighbor_k = 3;
  std::size_t top_terms = 8;
  std::size_t cell_px = 1;
  bool svg = false;
  unsigned threads = 0;
};

/// Parses the JSON config document. Relative paths resolve against `base_dir`.
/// Throws Error(MissingInput) when no data source is named.
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir);

struct OutputFile {
  std::string name;  // relative to the output directory
  std::size_t bytes = 0;
  std::string sha256;
};

struct PipelineResult {
  std::vector<OutputFile> outputs;  // sorted by name, manifest excluded
  std::filesystem::path manifest;
};

/// Runs every stage the config enables. Identical inputs and config give
/// byte-identical outputs, including manifest.json.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace psylex
