#include <gtest/gtest.h>

#include <random>

#include "echoaudit/error.h"
#include "echoaudit/metrics.h"

using namespace echoaudit;

namespace {

DisclosureVerdict predicted(const std::string& skill, const std::string& entity, Disclosure d) {
  DisclosureVerdict v;
  v.tuple = {std::nullopt, entity, skill};
  v.verdict = d;
  return v;
}

}  // namespace

TEST(Metrics, HandComputedFourClassMatrix) {
  ConfusionMatrix c{};
  c[0] = {5, 1, 0, 0};
  c[1] = {2, 6, 2, 0};
  c[2] = {0, 1, 3, 0};
  c[3] = {0, 0, 0, 4};
  ValidationMetrics m = metrics_from_confusion(c);
  EXPECT_EQ(m.n, 24u);
  EXPECT_NEAR(m.micro_precision, 0.75, 1e-12);
  // P = (5/7 + 6/8 + 3/5 + 1) / 4, R = (5/6 + 6/10 + 3/4 + 1) / 4
  EXPECT_NEAR(m.macro_precision, 0.7661, 5e-5);
  EXPECT_NEAR(m.macro_recall, 0.7958, 5e-5);
  EXPECT_NEAR(m.macro_f1, 0.7807, 5e-5);
  EXPECT_NEAR(m.macro_f1_class_mean, 0.7756, 5e-5);
  EXPECT_EQ(m.macro_classes, 4u);
  EXPECT_EQ(m.per_class[1].support, 10u);
  EXPECT_EQ(m.per_class[1].predicted, 8u);
}

TEST(Metrics, AbsentGoldClassExcludedFromMacro) {
  ConfusionMatrix c{};
  c[0] = {3, 0, 0, 0};
  ValidationMetrics m = metrics_from_confusion(c);
  EXPECT_EQ(m.macro_classes, 1u);
  EXPECT_DOUBLE_EQ(m.micro_f1, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_precision, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_recall, 1.0);
}

TEST(Metrics, MicroPrecisionEqualsRecall) {
  std::mt19937 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    ConfusionMatrix c{};
    for (auto& row : c) {
      for (auto& cell : row) cell = rng() % 7;
    }
    ValidationMetrics m = metrics_from_confusion(c);
    EXPECT_DOUBLE_EQ(m.micro_precision, m.micro_recall);
    EXPECT_DOUBLE_EQ(m.micro_f1, m.micro_precision);
  }
}

TEST(Metrics, PerfectPrediction) {
  std::vector<DisclosureVerdict> p = {predicted("a", "X", Disclosure::kClear),
                                      predicted("a", "Y", Disclosure::kVague),
                                      predicted("b", "X", Disclosure::kNoPolicy)};
  std::vector<GoldLabel> g;
  for (const auto& v : p) g.push_back({v.tuple, v.verdict});
  ValidationMetrics m = validation_metrics(p, g);
  EXPECT_DOUBLE_EQ(m.micro_f1, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
}

TEST(Metrics, MisalignedSetsThrow) {
  std::vector<DisclosureVerdict> p = {predicted("a", "X", Disclosure::kClear)};
  std::vector<GoldLabel> g = {{{std::nullopt, "Y", "a"}, Disclosure::kClear}};
  EXPECT_THROW(validation_metrics(p, g), InputError);
}

TEST(Gold, ParsesQuotedAndEmptyDataType) {
  auto g = parse_gold("skill_id,data_type,entity,verdict\nsk,,\"Acme, Inc\",vague\nsk,audio,Amazon,clear\n");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_FALSE(g[0].tuple.data_type);
  EXPECT_EQ(g[0].tuple.entity, "Acme, Inc");
  EXPECT_EQ(g[1].verdict, Disclosure::kClear);
}

TEST(Gold, BadVerdictThrows) {
  EXPECT_THROW(parse_gold("skill_id,data_type,entity,verdict\nsk,,X,maybe\n"), InputError);
}
