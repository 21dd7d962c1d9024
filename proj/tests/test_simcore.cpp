#include <doctest.h>

#include "oracles.hpp"
#include "psylex/error.hpp"
#include "psylex/simcore.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace psylex;
using doctest::Approx;

namespace {

CorrelationMatrix corr_from_columns(std::initializer_list<std::vector<double>> cols) {
  std::vector<std::vector<double>> c(cols);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(c.front().size()), static_cast<Eigen::Index>(c.size()));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < c.size(); ++j) {
    names.push_back("t" + std::to_string(j));
    for (std::size_t i = 0; i < c[j].size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c[j][i];
  }
  return term_correlations(m, TermSet(names));
}

/// 3-term matrix with the given strict lower triangle (r10, r20, r21).
CorrelationMatrix from_lower(double r10, double r20, double r21, std::optional<std::size_t> n) {
  CorrelationMatrix c;
  c.terms = TermSet({"a", "b", "c"});
  c.values.resize(3, 3);
  c.values << 1, r10, r20, r10, 1, r21, r20, r21, 1;
  c.n_obs = n;
  return c;
}

}  // namespace

TEST_CASE("term_correlations on hand examples") {
  CHECK(corr_from_columns({{1, 2, 3}, {2, 4, 6}}).values(0, 1) == Approx(1.0).epsilon(1e-15));
  CHECK(corr_from_columns({{1, 2, 3}, {6, 4, 2}}).values(0, 1) == Approx(-1.0).epsilon(1e-15));
  // Deviations (-1.5,-.5,.5,1.5) and (-1.5,.5,-.5,1.5): cross 4, squares 5 and 5.
  const auto c = corr_from_columns({{1, 2, 3, 4}, {1, 3, 2, 4}});
  CHECK(std::abs(c.values(0, 1) - 0.8) < 1e-12);
  CHECK(c.n_obs == std::optional<std::size_t>(4));
}

TEST_CASE("term_correlations rejects constant columns and short input") {
  Eigen::MatrixXd m(4, 2);
  m << 1, 3, 2, 3, 3, 3, 4, 3;
  try {
    term_correlations(m, TermSet({"x", "flat"}));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateTerm);
    CHECK(std::string(e.what()).find("flat") != std::string::npos);
  }
  Eigen::MatrixXd two(2, 2);
  two << 1, 2, 3, 5;
  CHECK_THROWS_AS(term_correlations(two, TermSet({"x", "y"})), Error);
}

TEST_CASE("term_correlations invariants on random data") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = oracle::factor_data(50, 12, 3, rng);
  const TermSet terms = TermSet(std::vector<std::string>{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"});
  const auto c = term_correlations(x, terms, 1);

  CHECK((c.values - c.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(c.values(i, i) == 1.0);
  CHECK(c.values.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  CHECK((c.values - oracle::correlation_of(x)).cwiseAbs().maxCoeff() < 1e-12);

  SUBCASE("thread count does not change a single bit") {
    const auto c4 = term_correlations(x, terms, 4);
    CHECK((c4.values - c.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("affine transform of one column") {
    Eigen::MatrixXd y = x;
    y.col(2) = 3.5 * y.col(2).array() + 10.0;
    const auto cy = term_correlations(y, terms);
    CHECK((cy.values - c.values).cwiseAbs().maxCoeff() < 1e-10);
    y.col(2) = -0.25 * x.col(2).array() - 4.0;
    const auto cn = term_correlations(y, terms);
    for (Eigen::Index j = 0; j < 12; ++j) {
      if (j == 2) continue;
      CHECK(std::abs(cn.values(2, j) + c.values(2, j)) < 1e-10);
    }
  }
}

TEST_CASE("combine_sources") {
  std::mt19937_64 rng(9);
  auto make = [&](int dims, const std::string& q) {
    EmbeddingMatrix e;
    e.terms = TermSet({"a", "b", "c", "d", "e", "f"});
    e.values = oracle::factor_data(static_cast<std::size_t>(dims), 6, 2, rng).transpose();
    e.provenance = {"m", q, "last_hidden"};
    return e;
  };
  const std::vector<EmbeddingMatrix> one{make(40, "q1")};
  const auto single = term_correlations(one[0]);

  SUBCASE("fisher mean of identical sources equals the single-source matrix") {
    const std::vector<EmbeddingMatrix> twice{one[0], one[0]};
    const auto f = combine_sources(twice, CombineMode::FisherMean);
    CHECK((f.matrix.values - single.values).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("concat uses every dimension") {
    const std::vector<EmbeddingMatrix> srcs{make(30, "q1"), make(25, "q2")};
    const auto c = combine_sources(srcs, CombineMode::Concat);
    CHECK(c.matrix.n_obs == std::optional<std::size_t>(55));
    CHECK(c.constant_dims_dropped == 0);
  }
  SUBCASE("source order") {
    const std::vector<EmbeddingMatrix> fwd{make(30, "q1"), make(20, "q2"), make(35, "q3")};
    const std::vector<EmbeddingMatrix> rev{fwd[2], fwd[0], fwd[1]};
    const auto f1 = combine_sources(fwd, CombineMode::FisherMean);
    const auto f2 = combine_sources(rev, CombineMode::FisherMean);
    CHECK((f1.matrix.values - f2.matrix.values).cwiseAbs().maxCoeff() == 0.0);
    const auto c1 = combine_sources(fwd, CombineMode::Concat);
    const auto c2 = combine_sources(rev, CombineMode::Concat);
    CHECK((c1.matrix.values - c2.matrix.values).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("term order mismatch") {
    EmbeddingMatrix other = one[0];
    other.terms = TermSet({"b", "a", "c", "d", "e", "f"});
    const std::vector<EmbeddingMatrix> srcs{one[0], other};
    CHECK_THROWS_AS(combine_sources(srcs), Error);
  }
  SUBCASE("perfectly correlated terms are clamped under fisher mean") {
    EmbeddingMatrix e = one[0];
    e.values.row(1) = 2.0 * e.values.row(0).array() + 1.0;
    const std::vector<EmbeddingMatrix> srcs{e, e};
    const auto f = combine_sources(srcs, CombineMode::FisherMean);
    CHECK(f.clamped_entries == 2);
    CHECK(f.matrix.values(1, 0) == Approx(1.0).epsilon(1e-9));
    CHECK(f.matrix.values(1, 0) < 1.0);
  }
}

TEST_CASE("magnitude_stats") {
  CorrelationMatrix id;
  id.terms = TermSet({"a", "b", "c"});
  id.values = Eigen::MatrixXd::Identity(3, 3);
  const auto z = magnitude_stats(id);
  CHECK(z.mean_abs == 0.0);
  CHECK(z.median_abs == 0.0);
  CHECK(z.pairs == 3);

  const auto c = from_lower(0.5, -0.2, 0.1, std::nullopt);
  const auto s = magnitude_stats(c);
  CHECK(s.mean_abs == Approx(0.8 / 3));
  CHECK(s.median_abs == Approx(0.2));

  CorrelationMatrix four;
  four.terms = TermSet({"a", "b", "c", "d"});
  four.values = Eigen::MatrixXd::Identity(4, 4);
  const double lower[] = {0.1, -0.4, 0.3, 0.2, -0.6, 0.5};
  int k = 0;
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j) four.values(i, j) = four.values(j, i) = lower[k++];
  CHECK(magnitude_stats(four).median_abs == Approx(0.35));  // average of the middle two
  CHECK(pair_count(435) == 94395);
}

TEST_CASE("critical r agrees with the quadrature t oracle") {
  const double lib = critical_r(899, 0.01);
  const double ref = oracle::critical_r(899, 0.01);
  CHECK(std::abs(lib - ref) < 1e-9);
  CHECK(std::abs(lib - 0.0858694693) < 1e-9);
  CHECK(std::abs(critical_r(100, 0.01) - 0.2564834517) < 1e-9);
  CHECK(std::abs(critical_r(100, 0.01) - oracle::critical_r(100, 0.01)) < 1e-9);
  CHECK(std::abs(p_value(0.3, 50) - oracle::t_two_tailed_p(0.3 * std::sqrt(48.0) / std::sqrt(1 - 0.09), 48)) < 1e-10);
}

TEST_CASE("significance_mask") {
  const auto c = from_lower(0.5, 0.2, 0.0, 100);
  const auto m = significance_mask(c, 0.01);
  CHECK(m(1, 0));
  CHECK_FALSE(m(2, 0));
  CHECK_FALSE(m(2, 1));
  CHECK(m(0, 0));
  auto no_n = c;
  no_n.n_obs.reset();
  CHECK_THROWS_AS(significance_mask(no_n, 0.01), Error);

  // Monotone in |r|.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 500; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    const auto ab = from_lower(a, b, 0.0, 60);
    const auto mask = significance_mask(ab, 0.05);
    if (std::abs(a) >= std::abs(b)) CHECK(mask(1, 0) >= mask(2, 0));
    else CHECK(mask(2, 0) >= mask(1, 0));
  }
}

TEST_CASE("directional_consistency hand trace") {
  const auto a = from_lower(0.5, -0.2, 0.1, 100);
  const auto b = from_lower(0.4, 0.3, -0.05, std::nullopt);
  const auto r = directional_consistency(a, b, 0.01);
  CHECK(r.total_pairs == 3);
  CHECK(r.pct_same_sign == Approx(1.0 / 3));
  CHECK(r.pct_inconsistent_nonsig == 1.0);
  CHECK(r.pct_sig_flipped == 0.0);
  CHECK(r.significant_pairs == 1);
  CHECK(r.congruence_over_sig == Approx(1.0));
}

TEST_CASE("directional_consistency counts zeros as consistent and flags flipped significant pairs") {
  const auto a = from_lower(0.6, 0.0, -0.7, 100);
  const auto b = from_lower(-0.1, 0.4, 0.2, std::nullopt);
  const auto r = directional_consistency(a, b, 0.01);
  CHECK(r.pct_same_sign == Approx(1.0 / 3));
  CHECK(r.pct_sig_flipped == Approx(2.0 / 3));
  CHECK(r.pct_inconsistent_nonsig == 0.0);
  CHECK(r.congruence_over_sig == Approx((0.6 * -0.1 + -0.7 * 0.2) / std::sqrt((0.36 + 0.49) * (0.01 + 0.04))));
}

TEST_CASE("directional_consistency of a matrix with itself is exact") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = oracle::factor_data(120, 25, 3, rng);
  std::vector<std::string> names;
  for (int i = 0; i < 25; ++i) names.push_back("v" + std::to_string(i));
  const auto c = term_correlations(x, TermSet(names));
  const auto r = directional_consistency(c, c, 0.01);
  CHECK(r.pct_same_sign == 1.0);
  CHECK(r.pct_sig_flipped == 0.0);
  CHECK(r.congruence_over_sig == 1.0);
  CHECK(r.total_pairs == 300);
}

TEST_CASE("profile_correlations") {
  SUBCASE("two-point proportional profiles") {
    const auto a = from_lower(0.2, 0.4, 0.1, 50);
    const auto b = from_lower(0.4, 0.8, -0.3, 50);
    const auto p = profile_correlations(a, b);
    CHECK(p.per_term[0] == Approx(1.0));
  }
  SUBCASE("self comparison") {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd x = oracle::factor_data(60, 10, 2, rng);
    std::vector<std::string> names;
    for (int i = 0; i < 10; ++i) names.push_back("v" + std::to_string(i));
    const auto c = term_correlations(x, TermSet(names));
    const auto p = profile_correlations(c, c, 0.6);
    for (double r : p.per_term) CHECK(r == Approx(1.0).epsilon(1e-12));
    CHECK(p.pct_ge == 1.0);
    CHECK(p.sd == Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("too few terms") {
    CorrelationMatrix two;
    two.terms = TermSet({"a", "b"});
    two.values = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(profile_correlations(two, two), Error);
  }
  SUBCASE("summary uses sample sd") {
    CorrelationMatrix a;
    a.terms = TermSet({"a", "b", "c", "d"});
    a.values.resize(4, 4);
    a.values << 1, .5, .2, -.1, .5, 1, .3, .4, .2, .3, 1, -.2, -.1, .4, -.2, 1;
    CorrelationMatrix b = a;
    b.values << 1, .4, .25, 0, .4, 1, .1, .5, .25, .1, 1, -.3, 0, .5, -.3, 1;
    const auto p = profile_correlations(a, b, 0.6);
    std::vector<double> manual;
    for (int t = 0; t < 4; ++t) {
      std::vector<double> xa, xb;
      for (int j = 0; j < 4; ++j)
        if (j != t) {
          xa.push_back(a.values(t, j));
          xb.push_back(b.values(t, j));
        }
      manual.push_back(oracle::column_correlations(Eigen::Map<Eigen::VectorXd>(xa.data(), 3),
                                                   Eigen::Map<Eigen::VectorXd>(xb.data(), 3))(0, 0));
    }
    double m = 0;
    for (double v : manual) m += v / 4;
    double ss = 0;
    for (double v : manual) ss += (v - m) * (v - m);
    for (int t = 0; t < 4; ++t) CHECK(p.per_term[static_cast<std::size_t>(t)] == Approx(manual[static_cast<std::size_t>(t)]));
    CHECK(p.mean == Approx(m));
    CHECK(p.sd == Approx(std::sqrt(ss / 3)));
  }
}

TEST_CASE("neighbors sorts and breaks ties by term order") {
  CorrelationMatrix c;
  c.terms = TermSet({"fearful", "cowardly", "fretful", "bold", "calm"});
  c.values.resize(5, 5);
  c.values << 1, .6, .6, -.5, -.5,  //
      .6, 1, .2, -.1, 0,            //
      .6, .2, 1, 0, -.1,            //
      -.5, -.1, 0, 1, .3,           //
      -.5, 0, -.1, .3, 1;
  const auto r = neighbors(c, "FEARFUL", 2);
  CHECK(r.term == "fearful");
  REQUIRE(r.nearest.size() == 2);
  CHECK(r.nearest[0].term == "cowardly");
  CHECK(r.nearest[1].term == "fretful");
  CHECK(r.furthest[0].term == "bold");
  CHECK(r.furthest[1].term == "calm");
  CHECK_THROWS_AS(neighbors(c, "brave", 2), Error);
  CHECK_THROWS_AS(neighbors(c, "bold", 5), Error);
  CHECK_THROWS_AS(neighbors(c, "bold", 0), Error);
}

TEST_CASE("correlation table round trip keeps n_obs and values") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = oracle::factor_data(30, 5, 2, rng);
  const auto c = term_correlations(x, TermSet({"a b", "c", "d", "e", "f"}));
  std::stringstream ss;
  write_correlation_matrix(ss, c);
  const auto back = read_correlation_matrix(ss);
  CHECK(back.n_obs == c.n_obs);
  CHECK((back.values - c.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.terms.same_terms(c.terms));
}
