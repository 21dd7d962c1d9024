#include <doctest.h>

#include "psylex/error.hpp"
#include "psylex/pipeline.hpp"
#include "psylex/synthetic.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace psylex;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("psylex_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// Ratings over the planted terms: respondents score each cluster, terms add noise.
void write_planted_ratings(const fs::path& p, const PlantedSpec& spec, std::size_t respondents) {
  std::mt19937_64 rng(spec.seed + 100);
  std::normal_distribution<double> g(0, 1);
  std::ostringstream out;
  const std::size_t t = spec.clusters * spec.terms_per_cluster;
  for (std::size_t i = 0; i < t; ++i)
    out << (i ? "," : "") << "c" << i / spec.terms_per_cluster << "_t" << i;
  out << '\n';
  for (std::size_t r = 0; r < respondents; ++r) {
    std::vector<double> trait(spec.clusters);
    for (auto& v : trait) v = g(rng);
    for (std::size_t i = 0; i < t; ++i) out << (i ? "," : "") << trait[i / spec.terms_per_cluster] + 0.6 * g(rng);
    out << '\n';
  }
  spit(p, out.str());
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PSYLEX_CLI_PATH + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kConfig = R"({
  "ratings": {"path": "ratings.csv", "delimiter": ","},
  "synthetic": {"clusters": 3, "terms_per_cluster": 8, "dims": 64, "noise_sd": 0.3, "seed": 5},
  "components": 3,
  "bassackwards": {"levels": 3},
  "neighbors": {"terms": ["c0_t0"], "k": 2},
  "top_terms": 4
})";

}  // namespace

TEST_CASE("pipeline config validation") {
  const fs::path dir = scratch("cfg");
  try {
    parse_pipeline_config("{}", dir);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingInput);
  }
  CHECK_THROWS_AS(parse_pipeline_config(R"({"synthetic": {}, "colour": 1})", dir), Error);
  CHECK_THROWS_AS(parse_pipeline_config("not json", dir), Error);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"embeddings": {"paths": ["a"], "combine": "max"}})", dir), Error);
  const auto cfg = parse_pipeline_config(R"({"ratings": "r.tsv", "components": 4})", dir);
  REQUIRE(cfg.ratings);
  CHECK(cfg.ratings->path == dir / "r.tsv");
  CHECK(cfg.components == 4);
}

TEST_CASE("pipeline reruns are byte-identical") {
  const fs::path dir = scratch("rerun");
  PlantedSpec spec{3, 8, 64, 0.3, 5};
  write_planted_ratings(dir / "ratings.csv", spec, 120);
  const auto cfg = parse_pipeline_config(kConfig, dir);

  const auto r1 = run_pipeline(cfg, dir / "out1");
  const auto r2 = run_pipeline(cfg, dir / "out2");
  CHECK(slurp(r1.manifest) == slurp(r2.manifest));
  REQUIRE(r1.outputs.size() == r2.outputs.size());
  for (std::size_t i = 0; i < r1.outputs.size(); ++i) {
    CHECK(r1.outputs[i].name == r2.outputs[i].name);
    CHECK(r1.outputs[i].sha256 == r2.outputs[i].sha256);
    CHECK(slurp(dir / "out1" / r1.outputs[i].name) == slurp(dir / "out2" / r2.outputs[i].name));
    CHECK(sha256_file(dir / "out1" / r1.outputs[i].name) == r1.outputs[i].sha256);
  }

  for (const char* name : {"ratings.corr.tsv", "embeddings.corr.tsv", "ratings.varimax.tsv", "congruence.varimax.tsv",
                           "profiles.tsv", "neighbors.txt", "summary.txt", "fig1_cluster.ratings.ppm",
                           "fig2_survey_loading.embeddings.ppm", "fig3_model_loading.order.txt"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / "out1" / name));
  }
  const std::string ppm = slurp(dir / "out1" / "fig1_cluster.ratings.ppm");
  CHECK(ppm.rfind("P6\n24 24\n255\n", 0) == 0);

  const auto manifest = nlohmann::json::parse(slurp(r1.manifest));
  CHECK(manifest.contains("inputs"));
  CHECK(manifest["outputs"].size() == r1.outputs.size());
  CHECK(slurp(r1.manifest).find(dir.string()) == std::string::npos);

  // The planted clusters show up as three identical-band components in both sources.
  const std::string cong = slurp(dir / "out1" / "congruence.varimax.tsv");
  std::size_t hits = 0;
  for (std::size_t pos = 0; (pos = cong.find("identical", pos)) != std::string::npos; ++pos) ++hits;
  CHECK(hits == 3);
}

TEST_CASE("pipeline stage errors carry the stage name") {
  const fs::path dir = scratch("stage");
  spit(dir / "ratings.csv", "a,b,c\n1,2,\n");
  const auto cfg = parse_pipeline_config(R"({"ratings": "ratings.csv"})", dir);
  try {
    run_pipeline(cfg, dir / "out");
    FAIL("no throw");
  } catch (const StageError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(e.code() == ErrorCode::MissingValue);
  }
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("command line exit codes and outputs") {
  const fs::path dir = scratch("cli");
  const fs::path log = dir / "log.txt";
  spit(dir / "terms.txt", "kind\nKind\nbold\nshy\n");
  CHECK(run_cli("terms \"" + (dir / "terms.txt").string() + "\"", log) == 0);
  CHECK(slurp(log).find("duplicates_dropped: 1") != std::string::npos);

  CHECK(run_cli("corr --ratings \"" + (dir / "missing.csv").string() + "\"", log) == 1);
  CHECK(run_cli("pipeline", log) == 1);

  // An indefinite correlation table is a numerical failure.
  spit(dir / "bad.tsv", "term\ta\tb\tc\na\t1\t0.9\t-0.9\nb\t0.9\t1\t0.9\nc\t-0.9\t0.9\t1\n");
  CHECK(run_cli("pca \"" + (dir / "bad.tsv").string() + "\" -k 1", log) == 2);
  CHECK(slurp(log).find("NotPositiveSemidefinite") != std::string::npos);

  spit(dir / "ratings.csv", "a,b,c\n1,2,4\n2,1,3\n3,5,1\n4,4,4\n5,3,2\n");
  CHECK(run_cli("--out \"" + (dir / "o").string() + "\" corr --ratings \"" + (dir / "ratings.csv").string() + "\"", log) == 0);
  CHECK(fs::exists(dir / "o" / "corr.tsv"));
}

TEST_CASE("extract-check validates files and a manifest") {
  const fs::path dir = scratch("extract");
  const fs::path log = dir / "log.txt";
  const auto e = planted_embeddings({2, 3, 16, 0.2, 3});
  {
    std::ofstream out(dir / "m1.q1.emb");
    write_embeddings(out, e);
  }
  std::ostringstream terms;
  for (const auto& t : e.terms.terms()) terms << t << '\n';
  spit(dir / "terms.txt", terms.str());
  const std::string file = (dir / "m1.q1.emb").string();

  CHECK(run_cli("extract-check \"" + file + "\" --dims 16 --terms \"" + (dir / "terms.txt").string() + "\"", log) == 0);
  CHECK(slurp(log).find("dims: 16") != std::string::npos);
  CHECK(run_cli("extract-check \"" + file + "\" --dims 32", log) == 1);

  nlohmann::json m;
  m["extractions"] = nlohmann::json::array(
      {{{"file", "m1.q1.emb"}, {"model", "planted"}, {"query", "seed3"}, {"term_set", "terms.txt"},
        {"sha256", sha256_file(dir / "m1.q1.emb")}}});
  spit(dir / "manifest.json", m.dump(2));
  CHECK(run_cli("extract-check --manifest \"" + (dir / "manifest.json").string() + "\"", log) == 0);
  CHECK(slurp(log).find("verified: 1") != std::string::npos);

  m["extractions"][0]["sha256"] = std::string(64, '0');
  spit(dir / "manifest.json", m.dump(2));
  CHECK(run_cli("extract-check --manifest \"" + (dir / "manifest.json").string() + "\"", log) == 1);

  spit(dir / "broken.emb", "#psylex-embeddings v1 dims=2 count=1 model=m query=q layer=l\na\t1\n");
  CHECK(run_cli("extract-check \"" + (dir / "broken.emb").string() + "\"", log) == 1);
  CHECK(slurp(log).find("DimsMismatch") != std::string::npos);
}
