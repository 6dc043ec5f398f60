#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "echoaudit/error.h"
#include "echoaudit/stats.h"

using namespace echoaudit;

namespace {

double u_of(const std::vector<double>& t, const std::vector<double>& c) {
  double u = 0;
  for (double x : t) {
    for (double y : c) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

// P(U >= u_obs) by enumerating every assignment of ranks 1..n1+n2.
double brute_force_upper(std::size_t n1, std::size_t n2, double u_obs) {
  const std::size_t n = n1 + n2;
  std::vector<int> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n1), 1);
  std::sort(pick.begin(), pick.end());
  std::size_t total = 0, hits = 0;
  do {
    std::vector<double> t, c;
    for (std::size_t i = 0; i < n; ++i) (pick[i] ? t : c).push_back(static_cast<double>(i));
    ++total;
    if (u_of(t, c) >= u_obs - 1e-9) ++hits;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<double> distinct_sample(std::mt19937& rng, std::size_t n, std::vector<double>& used) {
  std::uniform_real_distribution<double> d(0, 1);
  std::vector<double> out;
  while (out.size() < n) {
    double v = d(rng);
    if (std::find(used.begin(), used.end(), v) != used.end()) continue;
    used.push_back(v);
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST(MannWhitney, CompleteSeparation) {
  std::vector<double> t = {4, 5, 6}, c = {1, 2, 3};
  StatResult r = mann_whitney_one_sided(t, c);
  EXPECT_DOUBLE_EQ(r.u_statistic, 9);
  EXPECT_DOUBLE_EQ(r.effect_size_r, 1.0);
  EXPECT_EQ(r.method, StatMethod::kExact);
  EXPECT_NEAR(r.p_value, 0.05, 1e-12);
  EXPECT_EQ(r.size_label, SizeLabel::kLarge);
}

TEST(MannWhitney, IdenticalMultisets) {
  std::vector<double> t = {1, 2, 3, 4}, c = {4, 3, 2, 1};
  StatResult r = mann_whitney_one_sided(t, c);
  EXPECT_NEAR(r.effect_size_r, 0.0, 1e-12);
}

TEST(MannWhitney, AllTied) {
  std::vector<double> t = {2, 2}, c = {2, 2};
  StatResult r = mann_whitney_one_sided(t, c);
  EXPECT_DOUBLE_EQ(r.u_statistic, 2);
  EXPECT_DOUBLE_EQ(r.effect_size_r, 0);
  EXPECT_DOUBLE_EQ(r.p_value, 0.5);
  EXPECT_DOUBLE_EQ(r.p_two_sided, 1.0);
}

TEST(MannWhitney, SelfComparisonNotSignificant) {
  std::vector<double> t = {0.1, 0.4, 0.2, 0.9, 0.3, 0.8};
  StatResult r = mann_whitney_one_sided(t, t);
  EXPECT_GT(r.p_value, 0.05);
  EXPECT_NEAR(r.effect_size_r, 0, 1e-12);
}

TEST(MannWhitney, EmptySampleThrows) {
  std::vector<double> t = {1}, c;
  EXPECT_THROW(mann_whitney_one_sided(t, c), InputError);
}

TEST(MannWhitney, TiesForceNormalApproximation) {
  std::vector<double> t = {1, 2, 2, 3}, c = {0, 1, 2};
  EXPECT_EQ(mann_whitney_one_sided(t, c).method, StatMethod::kNormalApprox);
}

TEST(MannWhitney, ExactMatchesEnumeration) {
  std::mt19937 rng(1);
  for (std::size_t n1 = 1; n1 <= 6; ++n1) {
    for (std::size_t n2 = 1; n2 <= 6; ++n2) {
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> used;
        auto t = distinct_sample(rng, n1, used);
        auto c = distinct_sample(rng, n2, used);
        StatResult r = mann_whitney_one_sided(t, c);
        ASSERT_EQ(r.method, StatMethod::kExact);
        EXPECT_DOUBLE_EQ(r.u_statistic, u_of(t, c));
        EXPECT_NEAR(r.p_value, brute_force_upper(n1, n2, r.u_statistic), 1e-12) << n1 << "x" << n2;
      }
    }
  }
}

TEST(MannWhitney, ExactDistributionSumsToOne) {
  for (std::size_t n1 : {1u, 3u, 7u, 20u}) {
    auto d = exact_u_distribution(n1, 5);
    EXPECT_EQ(d.size(), n1 * 5 + 1);
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12);
    for (std::size_t u = 0; u < d.size(); ++u) EXPECT_NEAR(d[u], d[d.size() - 1 - u], 1e-15);
  }
}

TEST(MannWhitney, NormalCloseToExactAtTwenty) {
  std::mt19937 rng(2024);
  double worst = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> used;
    auto t = distinct_sample(rng, 20, used);
    auto c = distinct_sample(rng, 20, used);
    const double u = u_of(t, c);
    worst = std::max(worst, std::fabs(exact_upper_tail(20, 20, u) - normal_upper_tail(20, 20, u)));
  }
  EXPECT_LE(worst, 0.01);
}

TEST(MannWhitney, UComplementAndSignFlip) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> v(0, 9), len(1, 15);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (double& x : a) x = v(rng);
    for (double& x : b) x = v(rng);
    StatResult ab = mann_whitney_one_sided(a, b);
    StatResult ba = mann_whitney_one_sided(b, a);
    EXPECT_NEAR(ab.u_statistic + ba.u_statistic, static_cast<double>(a.size() * b.size()), 1e-9);
    EXPECT_NEAR(ab.effect_size_r, -ba.effect_size_r, 1e-12);
    EXPECT_GE(ab.effect_size_r, -1.0);
    EXPECT_LE(ab.effect_size_r, 1.0);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
    EXPECT_NEAR(ab.p_two_sided, ba.p_two_sided, 1e-12);
  }
}

TEST(MannWhitney, InvariantUnderScalingAndPermutation) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> d(0.01, 2.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(12), b(9);
    for (double& x : a) x = d(rng);
    for (double& x : b) x = d(rng);
    StatResult base = mann_whitney_one_sided(a, b);
    std::vector<double> sa = a, sb = b;
    for (double& x : sa) x *= 7.5;
    for (double& x : sb) x *= 7.5;
    std::shuffle(sa.begin(), sa.end(), rng);
    std::shuffle(sb.begin(), sb.end(), rng);
    StatResult other = mann_whitney_one_sided(sa, sb);
    EXPECT_DOUBLE_EQ(base.u_statistic, other.u_statistic);
    EXPECT_DOUBLE_EQ(base.p_value, other.p_value);
    EXPECT_DOUBLE_EQ(base.effect_size_r, other.effect_size_r);
  }
}

TEST(EffectSize, Boundaries) {
  EXPECT_EQ(effect_size_label(0.1099), SizeLabel::kNegligible);
  EXPECT_EQ(effect_size_label(0.11), SizeLabel::kSmall);
  EXPECT_EQ(effect_size_label(0.2799), SizeLabel::kSmall);
  EXPECT_EQ(effect_size_label(0.28), SizeLabel::kMedium);
  EXPECT_EQ(effect_size_label(0.4299), SizeLabel::kMedium);
  EXPECT_EQ(effect_size_label(0.43), SizeLabel::kLarge);
  EXPECT_EQ(effect_size_label(-0.30), SizeLabel::kMedium);
}

TEST(Midranks, TiesAveraged) {
  std::vector<double> v = {3, 1, 3, 2};
  EXPECT_EQ(midranks(v), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Median, EvenAndOdd) {
  EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_DOUBLE_EQ(median({5, 1, 3}), 3);
}
