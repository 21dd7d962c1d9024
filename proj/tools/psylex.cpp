// psylex: command-line front end for the term-structure toolkit.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include "psylex/compare.hpp"
#include "psylex/decomp.hpp"
#include "psylex/error.hpp"
#include "psylex/ingest.hpp"
#include "psylex/pipeline.hpp"
#include "psylex/report.hpp"
#include "psylex/rotate.hpp"
#include "psylex/simcore.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace psylex;

namespace {

std::string out_dir;
std::string config_file;
std::uint64_t seed = 0;
bool seed_given = false;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return in;
}

/// Writes to <out>/<name> when --out is set, otherwise to stdout.
void emit(const std::string& name, const std::string& content) {
  if (out_dir.empty()) {
    std::cout << content;
    return;
  }
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / name, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write '" + (fs::path(out_dir) / name).string() + "'");
  f << content;
  std::cerr << "wrote " << (fs::path(out_dir) / name).string() << '\n';
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s;
}

char delimiter_of(const std::string& d) {
  if (d == "\\t" || d == "tab") return '\t';
  if (d.size() != 1) throw Error(ErrorCode::InvalidArgument, "delimiter must be a single character");
  return d[0];
}

CorrelationMatrix load_corr(const std::string& path) {
  auto in = open_in(path);
  return read_correlation_matrix(in);
}

LoadingMatrix load_loadings(const std::string& path) {
  auto in = open_in(path);
  return read_loadings(in);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  auto in = open_in(path);
  return parse_embeddings(in);
}

std::string corr_text(const CorrelationMatrix& c) {
  std::ostringstream ss;
  write_correlation_matrix(ss, c);
  return ss.str();
}

int run_extract_check(const std::vector<std::string>& files, const std::string& terms_path, std::size_t dims,
                      const std::string& manifest_path) {
  std::optional<TermSet> expected;
  if (!terms_path.empty()) expected = parse_term_set(slurp(terms_path), fs::path(terms_path).stem().string()).terms;
  std::ostringstream rep;

  auto check_one = [&](const std::string& file) {
    const std::string bytes = slurp(file);
    std::istringstream in(bytes);
    const auto e = parse_embeddings(in);
    if (dims != 0 && e.dims() != dims) {
      throw Error(ErrorCode::DimsMismatch, file + ": dims=" + std::to_string(e.dims()) + ", expected " + std::to_string(dims));
    }
    if (expected && !e.terms.same_terms(*expected)) {
      throw Error(ErrorCode::TermMismatch, file + ": rows do not match the term list in order");
    }
    rep << "[" << fs::path(file).filename().string() << "]\n"
        << "model: " << e.provenance.model_id << "\nquery: " << e.provenance.query_id
        << "\nlayer: " << e.provenance.layer << "\ncount: " << e.terms.size() << "\ndims: " << e.dims()
        << "\nsha256: " << sha256_hex(bytes) << "\n\n";
    return e;
  };

  for (const auto& f : files) check_one(f);

  if (!manifest_path.empty()) {
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(slurp(manifest_path));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidArgument, std::string("extraction manifest: ") + ex.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    std::size_t verified = 0;
    try {
      for (const auto& entry : m.at("extractions")) {
        const fs::path file = base / entry.at("file").get<std::string>();
        const std::string bytes = slurp(file.string());
        if (entry.contains("sha256") && entry["sha256"].get<std::string>() != sha256_hex(bytes)) {
          throw Error(ErrorCode::InvalidArgument, file.string() + ": checksum does not match manifest");
        }
        const auto e = check_one(file.string());
        if (entry.contains("model") && entry["model"].get<std::string>() != e.provenance.model_id) {
          throw Error(ErrorCode::InvalidArgument, file.string() + ": model differs from manifest");
        }
        if (entry.contains("query") && entry["query"].get<std::string>() != e.provenance.query_id) {
          throw Error(ErrorCode::InvalidArgument, file.string() + ": query differs from manifest");
        }
        ++verified;
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidArgument, std::string("extraction manifest: ") + ex.what());
    }
    rep << "[manifest]\nverified: " << verified << "\n";
  }
  emit("extract-check.txt", rep.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psylex: term correlation structure from survey ratings and language-model embeddings"};
  app.require_subcommand(1);
  app.add_option("--out", out_dir, "Output directory (stdout when omitted, except for pipeline)");
  app.add_option("--config", config_file, "Pipeline config file (JSON)");
  app.add_option("--seed", seed, "Seed for synthetic data generation")->each([](const std::string&) { seed_given = true; });

  // terms
  auto* terms_cmd = app.add_subcommand("terms", "Clean and deduplicate a term list");
  std::string terms_file, terms_label, terms_against;
  terms_cmd->add_option("file", terms_file)->required();
  terms_cmd->add_option("--label", terms_label);
  terms_cmd->add_option("--against", terms_against, "Second list to report the overlap with");

  // extract-check
  auto* check_cmd = app.add_subcommand("extract-check", "Validate embedding interchange files");
  std::vector<std::string> check_files;
  std::string check_terms, check_manifest;
  std::size_t check_dims = 0;
  check_cmd->add_option("files", check_files);
  check_cmd->add_option("--terms", check_terms, "Term list the rows must match");
  check_cmd->add_option("--dims", check_dims, "Expected feature dimensions");
  check_cmd->add_option("--manifest", check_manifest, "Extraction manifest to verify");

  // corr
  auto* corr_cmd = app.add_subcommand("corr", "Term correlation matrix from ratings or embeddings");
  std::string corr_ratings, corr_embeddings, corr_delim = ",";
  bool corr_ipsatize = false;
  unsigned threads = 0;
  corr_cmd->add_option("--ratings", corr_ratings);
  corr_cmd->add_option("--embeddings", corr_embeddings);
  corr_cmd->add_option("--delimiter", corr_delim);
  corr_cmd->add_flag("--ipsatize", corr_ipsatize);
  corr_cmd->add_option("--threads", threads);

  // combine
  auto* combine_cmd = app.add_subcommand("combine", "Correlation matrix from several embedding files");
  std::vector<std::string> combine_files;
  std::string combine_mode = "concat";
  combine_cmd->add_option("files", combine_files)->required();
  combine_cmd->add_option("--mode", combine_mode)->check(CLI::IsMember({"concat", "fisher_mean"}));
  combine_cmd->add_option("--threads", threads);

  // pca
  auto* pca_cmd = app.add_subcommand("pca", "Principal components of a correlation matrix");
  std::string pca_corr;
  std::size_t pca_k = 5;
  pca_cmd->add_option("corr", pca_corr)->required();
  pca_cmd->add_option("-k,--components", pca_k);

  // rotate
  auto* rotate_cmd = app.add_subcommand("rotate", "Varimax rotation of a loadings table");
  std::string rotate_file;
  bool no_kaiser = false;
  VarimaxOptions vopts;
  rotate_cmd->add_option("loadings", rotate_file)->required();
  rotate_cmd->add_flag("--no-kaiser", no_kaiser);
  rotate_cmd->add_option("--tol", vopts.tol);
  rotate_cmd->add_option("--max-iter", vopts.max_iter);

  // congruence
  auto* cong_cmd = app.add_subcommand("congruence", "Tucker congruence between two loadings tables");
  std::string cong_a, cong_b;
  int cong_decimals = 17;
  cong_cmd->add_option("a", cong_a)->required();
  cong_cmd->add_option("b", cong_b)->required();
  cong_cmd->add_option("--decimals", cong_decimals);

  // bassackwards
  auto* ba_cmd = app.add_subcommand("bassackwards", "Cross-level component correlations");
  std::string ba_corr;
  std::size_t ba_levels = 5;
  bool ba_no_rotate = false;
  ba_cmd->add_option("corr", ba_corr)->required();
  ba_cmd->add_option("--levels", ba_levels);
  ba_cmd->add_flag("--no-rotate", ba_no_rotate);

  // consistency
  auto* cons_cmd = app.add_subcommand("consistency", "Directional consistency and profile correlations");
  std::string cons_a, cons_b;
  double alpha = 0.01, threshold = 0.60;
  cons_cmd->add_option("survey", cons_a, "Correlation table carrying n_obs")->required();
  cons_cmd->add_option("other", cons_b)->required();
  cons_cmd->add_option("--alpha", alpha);
  cons_cmd->add_option("--threshold", threshold);

  // neighbors
  auto* nb_cmd = app.add_subcommand("neighbors", "Nearest and furthest terms");
  std::string nb_corr;
  std::vector<std::string> nb_terms;
  std::size_t nb_k = 3;
  nb_cmd->add_option("corr", nb_corr)->required();
  nb_cmd->add_option("--term", nb_terms)->required();
  nb_cmd->add_option("-k", nb_k);

  // heatmap
  auto* hm_cmd = app.add_subcommand("heatmap", "Render a correlation matrix as a pixmap");
  std::string hm_corr, hm_order = "cluster", hm_loadings, hm_order_from, hm_name = "heatmap";
  std::size_t hm_cell = 1;
  bool hm_svg = false;
  hm_cmd->add_option("corr", hm_corr)->required();
  hm_cmd->add_option("--order", hm_order)->check(CLI::IsMember({"cluster", "loading", "identity"}));
  hm_cmd->add_option("--loadings", hm_loadings, "Loadings table for --order loading");
  hm_cmd->add_option("--order-from", hm_order_from, "Correlation table to cluster instead of the rendered one");
  hm_cmd->add_option("--cell-px", hm_cell);
  hm_cmd->add_option("--name", hm_name, "Output file stem");
  hm_cmd->add_flag("--svg", hm_svg);

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every configured stage into --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*terms_cmd) {
      const auto parsed = parse_term_set(slurp(terms_file), terms_label.empty() ? fs::path(terms_file).stem().string() : terms_label);
      std::ostringstream rep;
      rep << "label: " << parsed.terms.label() << "\nterms: " << parsed.terms.size()
          << "\nduplicates_dropped: " << parsed.duplicates_dropped << "\n";
      if (!terms_against.empty()) {
        const auto other = parse_term_set(slurp(terms_against), fs::path(terms_against).stem().string());
        const auto map = align_terms(parsed.terms, other.terms);
        rep << "against: " << other.terms.label() << "\nagainst_terms: " << other.terms.size()
            << "\nshared: " << map.pairs.size() << "\n";
      }
      if (!out_dir.empty()) {
        std::ostringstream list;
        write_term_set(list, parsed.terms);
        emit("terms.txt", list.str());
      }
      std::cout << rep.str();
    } else if (*check_cmd) {
      if (check_files.empty() && check_manifest.empty())
        throw Error(ErrorCode::MissingInput, "give embedding files or --manifest");
      return run_extract_check(check_files, check_terms, check_dims, check_manifest);
    } else if (*corr_cmd) {
      if (corr_ratings.empty() == corr_embeddings.empty())
        throw Error(ErrorCode::MissingInput, "give exactly one of --ratings or --embeddings");
      CorrelationMatrix c;
      if (!corr_ratings.empty()) {
        auto in = open_in(corr_ratings);
        auto r = parse_ratings(in, delimiter_of(corr_delim));
        if (corr_ipsatize) r = ipsatize(r);
        c = term_correlations(r, threads);
      } else {
        c = term_correlations(load_embeddings(corr_embeddings), threads);
      }
      emit("corr.tsv", corr_text(c));
    } else if (*combine_cmd) {
      std::vector<EmbeddingMatrix> sources;
      for (const auto& f : combine_files) sources.push_back(load_embeddings(f));
      const auto res = combine_sources(sources, combine_mode == "concat" ? CombineMode::Concat : CombineMode::FisherMean, threads);
      if (res.clamped_entries > 0) std::cerr << "clamped_entries: " << res.clamped_entries << '\n';
      if (res.constant_dims_dropped > 0) std::cerr << "constant_dims_dropped: " << res.constant_dims_dropped << '\n';
      emit("combined.corr.tsv", corr_text(res.matrix));
    } else if (*pca_cmd) {
      const auto sol = pca(load_corr(pca_corr), pca_k);
      const auto vp = variance_proportions(sol);
      std::ostringstream rep, tab;
      const auto shown = std::min<Eigen::Index>(sol.eigenvalues.size(), std::max<Eigen::Index>(10, static_cast<Eigen::Index>(pca_k)));
      rep << "components: " << sol.k << "\neigenvalues: " << join(sol.eigenvalues.head(shown))
          << "\nvariance_total: " << num(vp.overall.sum()) << "\nvariance_overall: " << join(vp.overall)
          << "\nvariance_among_extracted: " << join(vp.among_extracted) << "\n";
      for (const auto& w : sol.warnings) rep << "warning: " << w << "\n";
      write_loadings(tab, sol.loadings);
      if (out_dir.empty()) {
        std::cout << rep.str() << "\n" << tab.str();
      } else {
        emit("pca.txt", rep.str());
        emit("loadings.tsv", tab.str());
      }
    } else if (*rotate_cmd) {
      vopts.kaiser = !no_kaiser;
      const auto res = varimax(load_loadings(rotate_file), vopts);
      const auto vp = variance_proportions(res.rotated);
      std::ostringstream rep, tab, rot;
      rep << "criterion: " << num(res.criterion) << "\ninitial_criterion: " << num(res.initial_criterion)
          << "\niterations: " << res.iterations << "\nconverged: " << (res.converged ? "true" : "false")
          << "\nvariance_among_extracted: " << join(vp.among_extracted) << "\n";
      write_loadings(tab, res.rotated);
      for (Eigen::Index i = 0; i < res.rotation.rows(); ++i) {
        for (Eigen::Index j = 0; j < res.rotation.cols(); ++j) rot << (j ? "\t" : "") << format_shortest(res.rotation(i, j));
        rot << '\n';
      }
      if (out_dir.empty()) {
        std::cout << rep.str() << "\n" << tab.str();
      } else {
        emit("rotate.txt", rep.str());
        emit("varimax.tsv", tab.str());
        emit("rotation.tsv", rot.str());
      }
    } else if (*cong_cmd) {
      const auto a = load_loadings(cong_a);
      const auto b = load_loadings(cong_b);
      std::optional<AlignmentMap> map;
      if (!a.terms.same_terms(b.terms)) map = align_terms(a.terms, b.terms);
      const auto rep = congruence_matrix(a, b, map);
      std::ostringstream ss;
      write_congruence(ss, rep, cong_decimals);
      emit("congruence.tsv", ss.str());
    } else if (*ba_cmd) {
      const auto res = bass_ackwards(load_corr(ba_corr), ba_levels, !ba_no_rotate);
      std::ostringstream ss;
      write_level_links(ss, res);
      emit("bassackwards.tsv", ss.str());
    } else if (*cons_cmd) {
      const auto a = load_corr(cons_a);
      const auto b = load_corr(cons_b);
      const auto c = directional_consistency(a, b, alpha);
      const auto p = profile_correlations(a, b, threshold);
      std::ostringstream ss;
      ss << "alpha: " << num(c.alpha) << "\ntotal_pairs: " << c.total_pairs << "\nsignificant_pairs: "
         << c.significant_pairs << "\npct_same_sign: " << num(c.pct_same_sign) << "\npct_inconsistent_nonsig: "
         << num(c.pct_inconsistent_nonsig) << "\npct_sig_flipped: " << num(c.pct_sig_flipped)
         << "\ncongruence_over_sig: " << num(c.congruence_over_sig) << "\npearson_over_sig: " << num(c.pearson_over_sig)
         << "\nprofile_mean: " << num(p.mean) << "\nprofile_sd: " << num(p.sd) << "\nprofile_median: " << num(p.median)
         << "\nprofile_threshold: " << num(p.threshold) << "\nprofile_pct_ge: " << num(p.pct_ge) << "\n";
      emit("consistency.txt", ss.str());
    } else if (*nb_cmd) {
      const auto c = load_corr(nb_corr);
      std::ostringstream ss;
      for (const auto& t : nb_terms) {
        const auto rep = neighbors(c, t, nb_k);
        ss << "[" << rep.term << "]\nnearest:";
        for (const auto& n : rep.nearest) ss << " " << n.term << "=" << num(n.r);
        ss << "\nfurthest:";
        for (const auto& n : rep.furthest) ss << " " << n.term << "=" << num(n.r);
        ss << "\n";
      }
      emit("neighbors.txt", ss.str());
    } else if (*hm_cmd) {
      const auto c = load_corr(hm_corr);
      TermOrder order;
      if (hm_order == "cluster") {
        if (hm_order_from.empty()) {
          order = cluster_order(c);
        } else {
          const auto other = load_corr(hm_order_from);
          if (!other.terms.same_terms(c.terms)) throw Error(ErrorCode::TermMismatch, "--order-from has different terms");
          order = cluster_order(other);
        }
      } else if (hm_order == "loading") {
        if (hm_loadings.empty()) throw Error(ErrorCode::MissingInput, "--order loading needs --loadings");
        const auto l = load_loadings(hm_loadings);
        if (!l.terms.same_terms(c.terms)) throw Error(ErrorCode::TermMismatch, "loadings have different terms");
        order = loading_order(l);
      } else {
        order.permutation.resize(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) order.permutation[i] = i;
      }
      if (out_dir.empty()) throw Error(ErrorCode::MissingInput, "heatmap needs --out");
      const HeatmapSpec spec{hm_cell};
      const auto px = render_heatmap(c, order, spec);
      emit(hm_name + ".ppm", std::string(px.begin(), px.end()));
      if (hm_svg) emit(hm_name + ".svg", render_heatmap_svg(c, order, spec));
    } else if (*pipe_cmd) {
      if (config_file.empty()) throw Error(ErrorCode::MissingInput, "pipeline needs --config");
      if (out_dir.empty()) throw Error(ErrorCode::MissingInput, "pipeline needs --out");
      auto cfg = parse_pipeline_config(slurp(config_file), fs::path(config_file).parent_path());
      if (seed_given && cfg.synthetic) cfg.synthetic->seed = seed;
      const auto res = run_pipeline(cfg, out_dir);
      std::cout << "outputs: " << res.outputs.size() << "\nmanifest: " << res.manifest.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numerical(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
