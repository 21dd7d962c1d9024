#include "psylex/pipeline.hpp"

#include "psylex/compare.hpp"
#include "psylex/decomp.hpp"
#include "psylex/ingest.hpp"
#include "psylex/report.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace psylex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string vec_str(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s;
}

/// key: value document assembled in insertion order.
class KeyValueDoc {
 public:
  void section(const std::string& name) { text_ += (text_.empty() ? "" : "\n") + std::string("[") + name + "]\n"; }
  void put(const std::string& key, const std::string& value) { text_ += key + ": " + value + "\n"; }
  void put(const std::string& key, double value) { put(key, num(value)); }
  void put(const std::string& key, std::size_t value) { put(key, std::to_string(value)); }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& name, std::string_view bytes) {
    const fs::path p = root_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + p.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to '" + p.string() + "'");
    files_[name] = {name, bytes.size(), sha256_hex(bytes)};
  }

  template <typename Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream ss;
    fn(ss);
    write(name, ss.str());
  }

  std::vector<OutputFile> files() const {
    std::vector<OutputFile> out;
    for (const auto& [_, f] : files_) out.push_back(f);
    return out;
  }

 private:
  fs::path root_;
  std::map<std::string, OutputFile> files_;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

CorrelationMatrix submatrix(const CorrelationMatrix& c, const std::vector<std::size_t>& idx) {
  CorrelationMatrix out;
  out.n_obs = c.n_obs;
  out.terms = select_terms(c.terms, idx);
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out.values(i, j) = c.values(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                                  static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
  return out;
}

LoadingMatrix select_loadings(const LoadingMatrix& a, const std::vector<std::size_t>& idx) {
  LoadingMatrix out = a;
  out.values = select_rows(a.values, idx);
  out.terms = select_terms(a.terms, idx);
  return out;
}

struct SourceAnalysis {
  std::string name;
  CorrelationMatrix corr;
  PcaSolution pca;
  std::optional<RotationResult> varimax;
};

const char* mode_name(CombineMode m) { return m == CombineMode::Concat ? "concat" : "fisher_mean"; }

json config_echo(const PipelineConfig& c) {
  json j;
  if (c.ratings) {
    j["ratings"] = {{"file", c.ratings->path.filename().string()},
                    {"delimiter", std::string(1, c.ratings->delimiter)},
                    {"ipsatize", c.ratings->ipsatize}};
  }
  if (c.embeddings) {
    json files = json::array();
    for (const auto& p : c.embeddings->paths) files.push_back(p.filename().string());
    j["embeddings"] = {{"files", files}, {"combine", mode_name(c.embeddings->combine)}};
  }
  if (c.synthetic) {
    j["synthetic"] = {{"clusters", c.synthetic->clusters},
                      {"terms_per_cluster", c.synthetic->terms_per_cluster},
                      {"dims", c.synthetic->dims},
                      {"noise_sd", c.synthetic->noise_sd},
                      {"seed", c.synthetic->seed}};
  }
  if (c.terms) j["terms"] = c.terms->filename().string();
  j["components"] = c.components;
  j["rotation"] = {{"kaiser", c.rotation.kaiser}, {"tol", c.rotation.tol}, {"max_iter", c.rotation.max_iter}};
  j["bassackwards"] = {{"levels", c.bass_ackwards_levels}, {"rotate", c.bass_ackwards_rotate}};
  j["consistency"] = {{"alpha", c.alpha}, {"profile_threshold", c.profile_threshold}};
  j["neighbors"] = {{"terms", c.neighbor_terms}, {"k", c.neighbor_k}};
  j["top_terms"] = c.top_terms;
  j["heatmap"] = {{"cell_px", c.cell_px}, {"svg", c.svg}};
  return j;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error(ErrorCode::Io, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");

  static const std::set<std::string> known{"ratings", "embeddings", "synthetic", "terms", "components",
                                           "rotation", "bassackwards", "consistency", "neighbors",
                                           "top_terms", "heatmap", "threads"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  }
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  PipelineConfig c;
  try {
    if (j.contains("ratings")) {
      const auto& r = j["ratings"];
      PipelineConfig::Ratings rc;
      rc.path = resolve(r.is_string() ? r.get<std::string>() : r.at("path").get<std::string>());
      if (r.is_object()) {
        const std::string delim = r.value("delimiter", std::string(","));
        if (delim == "\\t" || delim == "tab") rc.delimiter = '\t';
        else if (delim.size() == 1) rc.delimiter = delim[0];
        else throw Error(ErrorCode::InvalidArgument, "delimiter must be one character");
        rc.ipsatize = r.value("ipsatize", false);
      }
      c.ratings = rc;
    }
    if (j.contains("embeddings")) {
      const auto& e = j["embeddings"];
      PipelineConfig::Embeddings ec;
      auto add_paths = [&](const json& v) {
        if (v.is_string()) ec.paths.push_back(resolve(v.get<std::string>()));
        else for (const auto& p : v) ec.paths.push_back(resolve(p.get<std::string>()));
      };
      if (e.is_object()) {
        if (e.contains("paths")) add_paths(e["paths"]);
        if (e.contains("path")) add_paths(e["path"]);
        const std::string mode = e.value("combine", std::string("concat"));
        if (mode == "concat") ec.combine = CombineMode::Concat;
        else if (mode == "fisher_mean") ec.combine = CombineMode::FisherMean;
        else throw Error(ErrorCode::InvalidArgument, "combine must be concat or fisher_mean");
      } else {
        add_paths(e);
      }
      if (ec.paths.empty()) throw Error(ErrorCode::MissingInput, "embeddings lists no files");
      c.embeddings = ec;
    }
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      PlantedSpec p;
      p.clusters = s.value("clusters", p.clusters);
      p.terms_per_cluster = s.value("terms_per_cluster", p.terms_per_cluster);
      p.dims = s.value("dims", p.dims);
      p.noise_sd = s.value("noise_sd", p.noise_sd);
      p.seed = s.value("seed", p.seed);
      c.synthetic = p;
    }
    if (j.contains("terms")) c.terms = resolve(j["terms"].get<std::string>());
    c.components = j.value("components", c.components);
    if (j.contains("rotation")) {
      const auto& r = j["rotation"];
      c.rotation.kaiser = r.value("kaiser", c.rotation.kaiser);
      c.rotation.tol = r.value("tol", c.rotation.tol);
      c.rotation.max_iter = r.value("max_iter", c.rotation.max_iter);
    }
    if (j.contains("bassackwards")) {
      const auto& b = j["bassackwards"];
      c.bass_ackwards_levels = b.value("levels", c.bass_ackwards_levels);
      c.bass_ackwards_rotate = b.value("rotate", c.bass_ackwards_rotate);
    }
    if (j.contains("consistency")) {
      const auto& s = j["consistency"];
      c.alpha = s.value("alpha", c.alpha);
      c.profile_threshold = s.value("profile_threshold", c.profile_threshold);
    }
    if (j.contains("neighbors")) {
      const auto& n = j["neighbors"];
      c.neighbor_terms = n.value("terms", std::vector<std::string>{});
      c.neighbor_k = n.value("k", c.neighbor_k);
    }
    c.top_terms = j.value("top_terms", c.top_terms);
    if (j.contains("heatmap")) {
      const auto& h = j["heatmap"];
      c.cell_px = h.value("cell_px", c.cell_px);
      c.svg = h.value("svg", c.svg);
    }
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  if (!c.ratings && !c.embeddings && !c.synthetic) {
    throw Error(ErrorCode::MissingInput, "config names no ratings, embeddings or synthetic source");
  }
  if (c.components < 1) throw Error(ErrorCode::InvalidArgument, "components must be at least 1");
  return c;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir) {
  if (!cfg.ratings && !cfg.embeddings && !cfg.synthetic) {
    throw StageError("config", Error(ErrorCode::MissingInput, "no data source configured"));
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw StageError("output", Error(ErrorCode::Io, "cannot create '" + out_dir.string() + "'"));
  OutputDir out(out_dir);
  json inputs = json::array();
  auto note_input = [&](const fs::path& p) {
    inputs.push_back({{"file", p.filename().string()}, {"sha256", sha256_file(p)}});
  };

  // ingest
  std::optional<RatingsMatrix> ratings;
  std::vector<EmbeddingMatrix> embeddings;
  std::size_t combine_clamped = 0;
  std::size_t combine_dropped = 0;
  stage("ingest", [&] {
    std::optional<TermSet> keep;
    if (cfg.terms) {
      keep = parse_term_set(read_file(*cfg.terms), cfg.terms->stem().string()).terms;
      note_input(*cfg.terms);
    }
    if (cfg.ratings) {
      std::istringstream in(read_file(cfg.ratings->path));
      note_input(cfg.ratings->path);
      RatingsMatrix r = parse_ratings(in, cfg.ratings->delimiter);
      r.terms.set_label(cfg.ratings->path.stem().string());
      if (cfg.ratings->ipsatize) r = ipsatize(r);
      if (keep) {
        const auto map = align_terms(*keep, r.terms);
        RatingsMatrix sub;
        sub.ipsatized = r.ipsatized;
        sub.terms = select_terms(r.terms, map.right_indices());
        sub.values.resize(r.values.rows(), static_cast<Eigen::Index>(map.pairs.size()));
        const auto cols = map.right_indices();
        for (std::size_t j = 0; j < cols.size(); ++j)
          sub.values.col(static_cast<Eigen::Index>(j)) = r.values.col(static_cast<Eigen::Index>(cols[j]));
        r = std::move(sub);
      }
      ratings = std::move(r);
    }
    if (cfg.embeddings) {
      for (const auto& p : cfg.embeddings->paths) {
        std::istringstream in(read_file(p));
        note_input(p);
        embeddings.push_back(parse_embeddings(in));
      }
    } else if (cfg.synthetic) {
      embeddings.push_back(planted_embeddings(*cfg.synthetic));
    }
    if (keep) {
      for (auto& e : embeddings) {
        const auto map = align_terms(*keep, e.terms);
        e.values = select_rows(e.values, map.right_indices());
        e.terms = select_terms(e.terms, map.right_indices());
      }
    }
    return 0;
  });

  std::vector<SourceAnalysis> sources;
  stage("correlate", [&] {
    if (ratings) {
      sources.push_back({"ratings", term_correlations(*ratings, cfg.threads), {}, {}});
    }
    if (!embeddings.empty()) {
      CorrelationMatrix c;
      if (embeddings.size() == 1) {
        c = term_correlations(embeddings.front(), cfg.threads);
      } else {
        auto combined = combine_sources(embeddings, cfg.embeddings->combine, cfg.threads);
        combine_clamped = combined.clamped_entries;
        combine_dropped = combined.constant_dims_dropped;
        c = std::move(combined.matrix);
      }
      c.terms.set_label("embeddings");
      sources.push_back({"embeddings", std::move(c), {}, {}});
    }
    for (const auto& s : sources) {
      out.write_with(s.name + ".corr.tsv", [&](std::ostream& os) { write_correlation_matrix(os, s.corr); });
    }
    return 0;
  });

  KeyValueDoc summary;
  summary.section("sources");
  if (ratings) {
    summary.put("ratings.terms", ratings->terms.size());
    summary.put("ratings.respondents", ratings->n_respondents());
    summary.put("ratings.ipsatized", std::string(ratings->ipsatized ? "true" : "false"));
  }
  if (!embeddings.empty()) {
    summary.put("embeddings.sources", embeddings.size());
    summary.put("embeddings.terms", embeddings.front().terms.size());
    if (embeddings.size() > 1) {
      summary.put("embeddings.combine", std::string(mode_name(cfg.embeddings->combine)));
      summary.put("embeddings.clamped_entries", combine_clamped);
      summary.put("embeddings.constant_dims_dropped", combine_dropped);
    }
  }
  summary.section("magnitude");
  for (const auto& s : sources) {
    const auto m = magnitude_stats(s.corr);
    summary.put(s.name + ".pairs", m.pairs);
    summary.put(s.name + ".mean_abs", m.mean_abs);
    summary.put(s.name + ".median_abs", m.median_abs);
  }

  stage("pca", [&] {
    summary.section("pca");
    for (auto& s : sources) {
      const std::size_t k = std::min(cfg.components, s.corr.size());
      s.pca = pca(s.corr, k);
      const auto vp = variance_proportions(s.pca);
      const auto shown = std::min<Eigen::Index>(s.pca.eigenvalues.size(), std::max<Eigen::Index>(10, static_cast<Eigen::Index>(k)));
      summary.put(s.name + ".eigenvalues", vec_str(s.pca.eigenvalues.head(shown)));
      summary.put(s.name + ".variance_total", vp.overall.sum());
      summary.put(s.name + ".variance_among_extracted", vec_str(vp.among_extracted));
      for (const auto& w : s.pca.warnings) summary.put(s.name + ".warning", w);
      out.write_with(s.name + ".unrotated.tsv", [&](std::ostream& os) { write_loadings(os, s.pca.loadings); });
      out.write_with(s.name + ".unrotated.report.tsv",
                     [&](std::ostream& os) { write_loadings(os, s.pca.loadings, LoadingPrecision::Report); });
      out.write_with(s.name + ".top_terms.tsv",
                     [&](std::ostream& os) { write_top_terms(os, s.pca.loadings, cfg.top_terms); });
    }
    return 0;
  });

  stage("rotate", [&] {
    summary.section("varimax");
    for (auto& s : sources) {
      if (s.pca.k < 2) continue;
      s.varimax = varimax(s.pca.loadings, cfg.rotation);
      const auto vp = variance_proportions(s.varimax->rotated);
      summary.put(s.name + ".criterion", s.varimax->criterion);
      summary.put(s.name + ".iterations", s.varimax->iterations);
      summary.put(s.name + ".converged", std::string(s.varimax->converged ? "true" : "false"));
      summary.put(s.name + ".variance_among_extracted", vec_str(vp.among_extracted));
      out.write_with(s.name + ".varimax.tsv", [&](std::ostream& os) { write_loadings(os, s.varimax->rotated); });
      out.write_with(s.name + ".varimax.report.tsv",
                     [&](std::ostream& os) { write_loadings(os, s.varimax->rotated, LoadingPrecision::Report); });
    }
    return 0;
  });

  stage("bassackwards", [&] {
    for (const auto& s : sources) {
      const std::size_t levels = std::min(cfg.bass_ackwards_levels, s.corr.size());
      if (levels < 2) continue;
      const auto ba = bass_ackwards(s.corr, levels, cfg.bass_ackwards_rotate, cfg.rotation);
      out.write_with(s.name + ".bassackwards.tsv", [&](std::ostream& os) { write_level_links(os, ba); });
    }
    return 0;
  });

  const bool both = sources.size() == 2;
  std::optional<AlignmentMap> shared;
  stage("compare", [&] {
    if (!both) return 0;
    const auto& r = sources[0];
    const auto& e = sources[1];
    shared = align_terms(r.corr.terms, e.corr.terms);
    summary.section("congruence");
    summary.put("shared_terms", shared->pairs.size());
    const auto unrot = congruence_matrix(r.pca.loadings, e.pca.loadings, shared);
    out.write_with("congruence.unrotated.tsv", [&](std::ostream& os) { write_congruence(os, unrot); });
    out.write_with("congruence.unrotated.report.tsv", [&](std::ostream& os) { write_congruence(os, unrot, 2); });
    std::string diag;
    for (Eigen::Index i = 0; i < std::min(unrot.values.rows(), unrot.values.cols()); ++i)
      diag += (i ? ", " : "") + num(unrot.values(i, i));
    summary.put("unrotated.diagonal", diag);
    if (r.varimax && e.varimax) {
      const auto rot = congruence_matrix(r.varimax->rotated, e.varimax->rotated, shared);
      out.write_with("congruence.varimax.tsv", [&](std::ostream& os) { write_congruence(os, rot); });
      out.write_with("congruence.varimax.report.tsv", [&](std::ostream& os) { write_congruence(os, rot, 2); });
      if (r.pca.k > 3) {
        // Three-component survey solution against the full embedding solution.
        const auto three = pca(r.corr, 3);
        const auto three_rot = varimax(three.loadings, cfg.rotation);
        const auto cm = congruence_matrix(three_rot.rotated, e.varimax->rotated, shared);
        out.write_with("congruence.varimax3.tsv", [&](std::ostream& os) { write_congruence(os, cm); });
      }
    }
    return 0;
  });

  stage("consistency", [&] {
    if (!both) return 0;
    const auto a = submatrix(sources[0].corr, shared->left_indices());
    const auto b = submatrix(sources[1].corr, shared->right_indices());
    const auto rep = directional_consistency(a, b, cfg.alpha);
    summary.section("consistency");
    summary.put("alpha", rep.alpha);
    summary.put("total_pairs", rep.total_pairs);
    summary.put("significant_pairs", rep.significant_pairs);
    summary.put("pct_same_sign", rep.pct_same_sign);
    summary.put("pct_inconsistent_nonsig", rep.pct_inconsistent_nonsig);
    summary.put("pct_sig_flipped", rep.pct_sig_flipped);
    summary.put("congruence_over_sig", rep.congruence_over_sig);
    summary.put("pearson_over_sig", rep.pearson_over_sig);
    if (a.size() >= 3) {
      const auto prof = profile_correlations(a, b, cfg.profile_threshold);
      summary.section("profiles");
      summary.put("mean", prof.mean);
      summary.put("sd", prof.sd);
      summary.put("median", prof.median);
      summary.put("threshold", prof.threshold);
      summary.put("pct_ge", prof.pct_ge);
      out.write_with("profiles.tsv", [&](std::ostream& os) {
        os << "term\tr\n";
        for (std::size_t i = 0; i < prof.per_term.size(); ++i) os << a.terms[i] << '\t' << num(prof.per_term[i]) << '\n';
      });
    }
    return 0;
  });

  stage("neighbors", [&] {
    if (cfg.neighbor_terms.empty()) return 0;
    KeyValueDoc doc;
    for (const auto& s : sources) {
      doc.section(s.name);
      const std::size_t k = std::min(cfg.neighbor_k, s.corr.size() - 1);
      for (const auto& t : cfg.neighbor_terms) {
        const auto rep = neighbors(s.corr, t, k);
        std::string near;
        std::string far;
        for (const auto& n : rep.nearest) near += (near.empty() ? "" : ", ") + n.term + " (" + num(n.r) + ")";
        for (const auto& n : rep.furthest) far += (far.empty() ? "" : ", ") + n.term + " (" + num(n.r) + ")";
        doc.put(rep.term + ".nearest", near);
        doc.put(rep.term + ".furthest", far);
      }
    }
    out.write("neighbors.txt", doc.str());
    return 0;
  });

  stage("heatmap", [&] {
    // Shared-term matrices so every figure shows the same variables.
    std::vector<CorrelationMatrix> mats;
    std::vector<const LoadingMatrix*> unrot;
    std::vector<const LoadingMatrix*> rot;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const auto& s = sources[i];
      std::vector<std::size_t> idx;
      if (both) idx = i == 0 ? shared->left_indices() : shared->right_indices();
      else {
        idx.resize(s.corr.size());
        for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t;
      }
      mats.push_back(submatrix(s.corr, idx));
      unrot.push_back(&s.pca.loadings);
      rot.push_back(s.varimax ? &s.varimax->rotated : nullptr);
    }
    auto shared_rows = [&](std::size_t i, const LoadingMatrix& l) {
      if (!both) return l;
      return select_loadings(l, i == 0 ? shared->left_indices() : shared->right_indices());
    };
    const HeatmapSpec spec{cfg.cell_px};
    auto emit = [&](const std::string& figure, const TermOrder& order) {
      for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::string base = figure + "." + sources[i].name;
        const auto px = render_heatmap(mats[i], order, spec);
        out.write(base + ".ppm", std::string_view(reinterpret_cast<const char*>(px.data()), px.size()));
        if (cfg.svg) out.write(base + ".svg", render_heatmap_svg(mats[i], order, spec));
      }
      out.write_with(figure + ".order.txt", [&](std::ostream& os) {
        for (auto t : order.permutation) os << mats[0].terms[t] << '\n';
      });
    };
    if (mats.front().size() >= 2) {
      emit("fig1_cluster", cluster_order(mats.back()));
    }
    const std::size_t survey = 0;
    const std::size_t model = sources.size() - 1;
    if (ratings) {
      const LoadingMatrix* l = rot[survey] ? rot[survey] : unrot[survey];
      emit("fig2_survey_loading", loading_order(shared_rows(survey, *l)));
    }
    if (!embeddings.empty()) {
      emit("fig3_model_loading", loading_order(shared_rows(model, *unrot[model])));
    }
    return 0;
  });

  out.write("summary.txt", summary.str());

  json manifest;
  manifest["tool"] = "psylex";
  manifest["manifest_version"] = 1;
  manifest["config"] = config_echo(cfg);
  manifest["inputs"] = inputs;
  json files = json::array();
  const auto written = out.files();
  for (const auto& f : written) files.push_back({{"file", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  manifest["outputs"] = files;
  const std::string text = manifest.dump(2) + "\n";
  const fs::path manifest_path = out_dir / "manifest.json";
  {
    std::ofstream m(manifest_path, std::ios::binary | std::ios::trunc);
    if (!m) throw StageError("manifest", Error(ErrorCode::Io, "cannot write manifest"));
    m << text;
  }
  return {written, manifest_path};
}

}  // namespace psylex
