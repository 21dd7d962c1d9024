#include <doctest.h>

#include "psylex/error.hpp"
#include "psylex/ingest.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>

using namespace psylex;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected psylex::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("parse_term_set drops case-folded duplicates and keeps first spelling") {
  const auto r = parse_term_set("kind\nKIND\nbold\n", "t");
  CHECK(r.terms.size() == 2);
  CHECK(r.terms[0] == "kind");
  CHECK(r.terms[1] == "bold");
  CHECK(r.duplicates_dropped == 1);
  CHECK(r.terms.label() == "t");
}

TEST_CASE("parse_term_set trims whitespace, skips blank lines, keeps casing") {
  const auto r = parse_term_set("  Amiable \r\n\n\t\nshy\n  amiable\n");
  REQUIRE(r.terms.size() == 2);
  CHECK(r.terms[0] == "Amiable");
  CHECK(r.terms.find("AMIABLE") == std::optional<std::size_t>(0));
  CHECK(r.duplicates_dropped == 1);
}

TEST_CASE("parse_term_set rejects empty input") {
  CHECK(code_of([] { parse_term_set(""); }) == ErrorCode::EmptyTermSet);
  CHECK(code_of([] { parse_term_set("\n  \n"); }) == ErrorCode::EmptyTermSet);
}

TEST_CASE("fold_case handles accented and non-Latin letters") {
  CHECK(fold_case("ÁMABLE") == "ámable");
  CHECK(fold_case("Niño") == "niño");
  CHECK(fold_case("ŁÓDŹ") == "łódź");
  CHECK(fold_case("ДОБРЫЙ") == "добрый");
  const auto r = parse_term_set("Amable\nAMABLE\namable\nÉxito\néxito\n");
  CHECK(r.terms.size() == 2);
  CHECK(r.duplicates_dropped == 3);
}

TEST_CASE("TermSet constructor rejects duplicates") {
  CHECK(code_of([] { TermSet({"a", "A"}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("parse_ratings reads a rectangular table") {
  std::istringstream in("warm,cold\n1,2\n3,4\n5,7\n");
  const auto m = parse_ratings(in, ',');
  CHECK(m.n_respondents() == 3);
  CHECK(m.terms.size() == 2);
  CHECK(m.values(2, 1) == 7.0);
  CHECK_FALSE(m.ipsatized);
}

TEST_CASE("parse_ratings error paths") {
  SUBCASE("empty cell") {
    std::istringstream in("a,b\n1,\n");
    CHECK(code_of([&] { parse_ratings(in, ','); }) == ErrorCode::MissingValue);
  }
  SUBCASE("NA cell") {
    std::istringstream in("a\tb\n1\tNA\n");
    CHECK(code_of([&] { parse_ratings(in, '\t'); }) == ErrorCode::MissingValue);
  }
  SUBCASE("ragged row") {
    std::istringstream in("a,b\n1,2,3\n");
    CHECK(code_of([&] { parse_ratings(in, ','); }) == ErrorCode::RaggedRow);
  }
  SUBCASE("garbage") {
    std::istringstream in("a,b\n1,x\n");
    CHECK(code_of([&] { parse_ratings(in, ','); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("ipsatize centers each respondent") {
  RatingsMatrix m;
  m.terms = TermSet({"a", "b", "c", "d"});
  m.values.resize(3, 4);
  m.values << 1, 2, 3, 6, 5, 5, 5, 5, 7, 1, 4, 8;
  const auto out = ipsatize(m);
  CHECK(out.ipsatized);
  CHECK(out.values(1, 0) == 0.0);
  CHECK(out.values(1, 3) == 0.0);
  CHECK(out.values(2, 0) == 2.0);
  CHECK(out.values(2, 1) == -4.0);
  CHECK(out.values(2, 2) == -1.0);
  CHECK(out.values(2, 3) == 3.0);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(out.values.row(i).mean()) < 1e-12);
  CHECK(code_of([&] { ipsatize(out); }) == ErrorCode::DoubleIpsatize);
}

TEST_CASE("ipsatize of row (1,2,3)") {
  RatingsMatrix m;
  m.terms = TermSet({"a", "b", "c"});
  m.values.resize(1, 3);
  m.values << 1, 2, 3;
  const auto out = ipsatize(m);
  CHECK(out.values(0, 0) == -1.0);
  CHECK(out.values(0, 1) == 0.0);
  CHECK(out.values(0, 2) == 1.0);
}

TEST_CASE("ipsatizing centered data changes nothing beyond 1e-12") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 3);
  RatingsMatrix m;
  m.terms = TermSet({"a", "b", "c", "d", "e"});
  m.values.resize(40, 5);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) m.values(i, j) = g(rng);
  auto once = ipsatize(m);
  auto raw_again = once;
  raw_again.ipsatized = false;
  const auto twice = ipsatize(raw_again);
  CHECK((twice.values - once.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("parse_embeddings reads header, provenance and rows in order") {
  std::istringstream in(
      "#psylex-embeddings v1 dims=3 count=2 model=deberta-large query=q2 layer=last_hidden\n"
      "kind\t0.5\t-1\t2e-3\n"
      "bold\t1\t2\t3\n");
  const auto e = parse_embeddings(in);
  CHECK(e.values.rows() == 2);
  CHECK(e.dims() == 3);
  CHECK(e.terms[0] == "kind");
  CHECK(e.terms[1] == "bold");
  CHECK(e.values(0, 2) == 2e-3);
  CHECK(e.provenance == Provenance{"deberta-large", "q2", "last_hidden"});
}

TEST_CASE("parse_embeddings error codes") {
  SUBCASE("dims mismatch reports the row") {
    std::istringstream in("#psylex-embeddings v1 dims=3 count=2 model=m query=q layer=l\na\t1\t2\t3\nb\t1\t2\n");
    try {
      parse_embeddings(in);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimsMismatch);
      CHECK(std::string(e.what()).find("row=1") != std::string::npos);
    }
  }
  SUBCASE("non-finite") {
    std::istringstream in("#psylex-embeddings v1 dims=2 count=1 model=m query=q layer=l\na\t1\tnan\n");
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::NonFiniteValue);
  }
  SUBCASE("count mismatch") {
    std::istringstream in("#psylex-embeddings v1 dims=2 count=3 model=m query=q layer=l\na\t1\t2\nb\t2\t1\n");
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::CountMismatch);
  }
  SUBCASE("bad header") {
    std::istringstream in("#embeddings dims=2\n");
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::BadHeader);
  }
  SUBCASE("constant row") {
    std::istringstream in("#psylex-embeddings v1 dims=2 count=1 model=m query=q layer=l\na\t1\t1\n");
    CHECK(code_of([&] { parse_embeddings(in); }) == ErrorCode::DegenerateTerm);
  }
}

TEST_CASE("embedding format round-trips bit-exactly for random values") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  std::uniform_int_distribution<int> ex(-300, 300);
  EmbeddingMatrix e;
  e.terms = TermSet({"alpha", "beta", "gamma", "delta"});
  e.provenance = {"m", "q7", "last_hidden"};
  e.values.resize(4, 33);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 33; ++j) e.values(i, j) = g(rng) * std::pow(10.0, ex(rng) / 10);
  e.values(0, 0) = -0.0;
  e.values(1, 1) = std::numeric_limits<double>::denorm_min();
  e.values(2, 2) = std::numeric_limits<double>::max();

  std::stringstream ss;
  write_embeddings(ss, e);
  const auto back = parse_embeddings(ss);
  REQUIRE(back.values.rows() == 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 33; ++j)
      CHECK(std::bit_cast<std::uint64_t>(back.values(i, j)) == std::bit_cast<std::uint64_t>(e.values(i, j)));
  CHECK(back.provenance == e.provenance);
  CHECK(back.terms.same_terms(e.terms));
}

TEST_CASE("align_terms intersects in a's order") {
  const TermSet a({"a", "b", "c"});
  const TermSet b({"B", "c", "d"});
  const auto m = align_terms(a, b);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == std::pair<std::size_t, std::size_t>{1, 0});
  CHECK(m.pairs[1] == std::pair<std::size_t, std::size_t>{2, 1});
  CHECK(m.terms[0] == "b");
}

TEST_CASE("align_terms identity and no-overlap") {
  const TermSet a({"x", "y", "z", "w"});
  const auto self = align_terms(a, a);
  REQUIRE(self.pairs.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(self.pairs[i] == std::pair{i, i});
  CHECK(code_of([&] { align_terms(a, TermSet({"q"})); }) == ErrorCode::NoOverlap);
}
