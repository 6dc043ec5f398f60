#pragma once

// Mann-Whitney U with rank-biserial effect size.

#include <cstddef>
#include <span>
#include <vector>

namespace echoaudit {

enum class StatMethod { kExact, kNormalApprox };
enum class SizeLabel { kNegligible, kSmall, kMedium, kLarge };

const char* to_string(StatMethod m);
const char* to_string(SizeLabel s);

struct StatResult {
  double u_statistic = 0;  // treatment-over-control wins, ties count 1/2
  double p_value = 1;      // one-sided: treatment stochastically greater
  double p_two_sided = 1;
  double effect_size_r = 0;
  std::size_t n_treatment = 0;
  std::size_t n_control = 0;
  StatMethod method = StatMethod::kNormalApprox;
  SizeLabel size_label = SizeLabel::kNegligible;
};

struct MannWhitneyOptions {
  // Exact null distribution when n1*n2 <= exact_cutoff and there are no ties.
  std::size_t exact_cutoff = 400;
};

inline constexpr std::size_t kMaxExactCutoff = 10000;

// Throws InputError if either sample is empty. If every value in both
// samples is identical: r = 0, p = 0.5, p_two_sided = 1.
StatResult mann_whitney_one_sided(std::span<const double> treatment,
                                  std::span<const double> control,
                                  const MannWhitneyOptions& options = {});

// |r| < 0.11 negligible, < 0.28 small, < 0.43 medium, else large.
SizeLabel effect_size_label(double r);

// Null distribution of U for tie-free samples: element u is P(U = u),
// u = 0..n1*n2.
std::vector<double> exact_u_distribution(std::size_t n1, std::size_t n2);

// P(U >= u) under the exact null.
double exact_upper_tail(std::size_t n1, std::size_t n2, double u);

// P(U >= u) by the normal approximation with continuity correction.
// `tie_term` is sum(t^3 - t) over tie groups.
double normal_upper_tail(std::size_t n1, std::size_t n2, double u, double tie_term = 0);

// Midranks (1-based) of `values`, in input order.
std::vector<double> midranks(std::span<const double> values);

// Lower-middle-average median (mean of the two middle values for even n).
double median(std::vector<double> values);
double mean(std::span<const double> values);

}  // namespace echoaudit
