#include <doctest.h>

#include <cmath>
#include <limits>

#include "mtopt/analysis.hpp"
#include "mtopt/errors.hpp"
#include "mtopt/rng.hpp"
#include "oracles.hpp"

using namespace mtopt;

TEST_CASE("cosine") {
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == doctest::Approx(1.0));
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(0.0));
  CHECK(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}) ==
        doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}) == 0.0);
}

TEST_CASE("diff metric on the published similarity rows") {
  CHECK(diff_metric(0.130, 0.116) == doctest::Approx(0.11382).epsilon(1e-4));
  CHECK(diff_metric(0.138, 0.106) == doctest::Approx(0.26230).epsilon(1e-4));
  CHECK(diff_metric(0.42, 0.42) == 0.0);
  CHECK(std::isinf(diff_metric(0.3, -0.3)));
  // symmetric under swapping the two sims
  CHECK(diff_metric(0.2, 0.05) == doctest::Approx(diff_metric(0.05, 0.2)));
}

namespace {

ExperimentSummary summ(const std::string& ds, const std::string& model,
                       const std::string& method, double auc_v, double diff_v) {
  ExperimentSummary s;
  s.dataset_id = ds;
  s.model_kind = model;
  s.method = method;
  s.avg_auc = auc_v;
  s.diff = diff_v;
  return s;
}

}  // namespace

TEST_CASE("pairwise indicators") {
  {
    const auto r = pairwise_indicators(
        {summ("d", "m", "A", 0.80, 0.1), summ("d", "m", "B", 0.79, 0.2)});
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0] == std::pair<int, int>{1, 0});
    CHECK(r.pairs[1] == std::pair<int, int>{0, 1});
    CHECK(r.dropped == 0);
  }
  {
    const auto r = pairwise_indicators(
        {summ("d", "m", "A", 0.8, 0.1), summ("d", "m", "B", 0.8, 0.1)});
    CHECK(r.pairs.empty());
    CHECK(r.dropped == 2);
  }
  {
    const auto r = pairwise_indicators({summ("d", "m", "A", 0.8, 0.3),
                                        summ("d", "m", "B", 0.7, 0.2),
                                        summ("d", "m", "C", 0.6, 0.1)});
    CHECK(r.pairs.size() == 6);
  }
  {
    // groups do not mix
    const auto r = pairwise_indicators(
        {summ("d1", "m", "A", 0.8, 0.1), summ("d2", "m", "B", 0.7, 0.2)});
    CHECK(r.pairs.empty());
  }
  {
    // antisymmetry without ties
    Rng rng(3);
    std::vector<ExperimentSummary> s;
    for (int i = 0; i < 5; ++i)
      s.push_back(summ("d", "m", "M" + std::to_string(i), rng.uniform01(),
                       rng.uniform01()));
    const auto r = pairwise_indicators(s);
    REQUIRE(r.pairs.size() == 20);
    for (std::size_t k = 0; k < r.pairs.size(); k += 1) {
      // find the mirrored pair
      int found = 0;
      for (const auto& q : r.pairs)
        if (q.first == 1 - r.pairs[k].first && q.second == 1 - r.pairs[k].second) ++found;
      CHECK(found >= 1);
    }
  }
}

TEST_CASE("chi-square 2x2") {
  {
    const auto r = chi_square_2x2({{{20, 10}, {10, 20}}});
    CHECK(r.chi2 == doctest::Approx(6.6667).epsilon(1e-4));
    CHECK(r.bucket == PBucket::p01);
  }
  {
    const auto r = chi_square_2x2({{{10, 10}, {10, 10}}});
    CHECK(r.chi2 == doctest::Approx(0.0));
    CHECK(r.bucket == PBucket::ns);
  }
  {
    const auto r = chi_square_2x2({{{30, 0}, {0, 30}}});
    CHECK(r.chi2 == doctest::Approx(60.0));
    CHECK(r.bucket == PBucket::p001);
  }
  CHECK_THROWS_AS(chi_square_2x2({{{5, 5}, {0, 0}}}), UndefinedStatError);
  // swapping the two rows leaves chi2 unchanged
  const auto a = chi_square_2x2({{{17, 4}, {8, 25}}});
  const auto b = chi_square_2x2({{{8, 25}, {17, 4}}});
  CHECK(a.chi2 == doctest::Approx(b.chi2).epsilon(1e-12));
}

TEST_CASE("welch t-test") {
  {
    const auto r = t_test_independent(std::vector<double>{1, 2, 3},
                                      std::vector<double>{2, 3, 4});
    CHECK(r.t == doctest::Approx(-1.22474).epsilon(1e-5));
    CHECK(r.df == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(r.bucket == PBucket::ns);
  }
  {
    const auto r = t_test_independent(std::vector<double>{2, 2, 2},
                                      std::vector<double>{2, 2, 2});
    CHECK(r.t == 0.0);
  }
  {
    std::vector<double> a = {0, 0, 0, 0};
    std::vector<double> b = {1, 1 + 1e-9, 1, 1 - 1e-9};
    const auto r = t_test_independent(a, b);
    CHECK(std::abs(r.t) > 1e6);
    CHECK(r.bucket == PBucket::p001);
  }
  {
    // swap symmetry: t flips sign
    const std::vector<double> a = {1.0, 1.4, 0.9, 1.7};
    const std::vector<double> b = {2.0, 2.2, 1.8};
    const auto r1 = t_test_independent(a, b);
    const auto r2 = t_test_independent(b, a);
    CHECK(r1.t == doctest::Approx(-r2.t).epsilon(1e-12));
    CHECK(r1.bucket == r2.bucket);
  }
  CHECK_THROWS_AS(
      t_test_independent(std::vector<double>{1.0}, std::vector<double>{1, 2}),
      ContractError);
}

TEST_CASE("incomplete beta sanity") {
  // symmetric case I_{1/2}(a, a) = 1/2
  CHECK(incomplete_beta(2.0, 2.0, 0.5) == doctest::Approx(0.5).epsilon(1e-10));
  // uniform case I_x(1, 1) = x
  CHECK(incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8},
            std::vector<double>{0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9},
            std::vector<double>{0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5},
            std::vector<double>{0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auc(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 1}),
                  UndefinedStatError);
  CHECK_THROWS_AS(auc(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 2}),
                  ContractError);
}

TEST_CASE("auc fast path equals the pair-counting oracle on tied instances") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 3 + static_cast<int>(rng.below(40));
    std::vector<double> scores(k), labels(k);
    bool pos = false, neg = false;
    for (int i = 0; i < k; ++i) {
      scores[i] = std::floor(rng.uniform01() * 8) / 8.0;  // force ties
      labels[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      pos |= labels[i] == 1.0;
      neg |= labels[i] == 0.0;
    }
    if (!pos) labels[0] = 1.0;
    if (!neg) labels[k - 1] = 0.0;
    CHECK(auc(scores, labels) == doctest::Approx(oracle::auc_pair_count(scores, labels))
                                     .epsilon(1e-14));
  }
}

TEST_CASE("delta_m examples") {
  {
    // one task, two higher-better criteria
    const double v = delta_m(std::vector<double>{39.29, 65.33},
                             std::vector<double>{38.31, 63.76},
                             std::vector<int>{0, 0}, std::vector<int>{0, 0});
    CHECK(v == doctest::Approx(-2.510).epsilon(1e-3));
  }
  {
    const double v = delta_m(std::vector<double>{1.5, 2.5},
                             std::vector<double>{1.5, 2.5},
                             std::vector<int>{0, 1}, std::vector<int>{0, 1});
    CHECK(v == 0.0);
  }
  {
    // lower-better metric improved by 10%
    const double v = delta_m(std::vector<double>{0.9}, std::vector<double>{1.0},
                             std::vector<int>{1}, std::vector<int>{0});
    CHECK(v == doctest::Approx(-10.0));
  }
  CHECK_THROWS_AS(delta_m(std::vector<double>{1.0}, std::vector<double>{0.0},
                          std::vector<int>{0}, std::vector<int>{0}),
                  UndefinedStatError);
}
