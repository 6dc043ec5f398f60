#pragma once

// Agreement between predicted and hand-labeled disclosure verdicts.

#include <array>
#include <filesystem>
#include <vector>

#include "echoaudit/policy.h"

namespace echoaudit {

struct GoldLabel {
  DataFlowTuple tuple;
  Disclosure verdict = Disclosure::kOmitted;
};

// CSV with header skill_id,data_type,entity,verdict. An empty data_type is
// an entity-only tuple. Quoted fields are supported.
std::vector<GoldLabel> load_gold(const std::filesystem::path& path);
std::vector<GoldLabel> parse_gold(std::string_view text, std::string_view source = "<memory>");

// confusion[gold][predicted], indexed by Disclosure.
using ConfusionMatrix = std::array<std::array<std::size_t, 4>, 4>;

struct ClassMetrics {
  Disclosure cls = Disclosure::kClear;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  std::size_t true_positive = 0;
  double precision = 0;  // 0 when nothing was predicted as this class
  double recall = 0;
  double f1 = 0;
};

struct ValidationMetrics {
  ConfusionMatrix confusion{};
  std::size_t n = 0;
  double micro_precision = 0;
  double micro_recall = 0;
  double micro_f1 = 0;
  // Unweighted means over classes present in gold.
  double macro_precision = 0;
  double macro_recall = 0;
  // Harmonic mean of macro_precision and macro_recall.
  double macro_f1 = 0;
  // Mean of per-class F1 over the same classes.
  double macro_f1_class_mean = 0;
  std::vector<ClassMetrics> per_class;  // all four classes
  std::size_t macro_classes = 0;
};

ValidationMetrics metrics_from_confusion(const ConfusionMatrix& confusion);

// Both sides must cover the same tuple set exactly once; otherwise
// InputError listing the first differences.
ValidationMetrics validation_metrics(const std::vector<DisclosureVerdict>& predicted,
                                     const std::vector<GoldLabel>& gold);

}  // namespace echoaudit
