#include "echoaudit/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "echoaudit/error.h"

namespace echoaudit {

const char* to_string(StatMethod m) {
  return m == StatMethod::kExact ? "exact" : "normal_approx";
}

const char* to_string(SizeLabel s) {
  switch (s) {
    case SizeLabel::kNegligible: return "negligible";
    case SizeLabel::kSmall: return "small";
    case SizeLabel::kMedium: return "medium";
    case SizeLabel::kLarge: return "large";
  }
  return "?";
}

SizeLabel effect_size_label(double r) {
  const double a = std::fabs(r);
  if (a < 0.11) return SizeLabel::kNegligible;
  if (a < 0.28) return SizeLabel::kSmall;
  if (a < 0.43) return SizeLabel::kMedium;
  return SizeLabel::kLarge;
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 share ranks i+1..j
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

// p(m, n, u) = m/(m+n) p(m-1, n, u-n) + n/(m+n) p(m, n-1, u).
// Rows are kept for every m <= n1 while n sweeps 0..n2.
std::vector<double> exact_u_distribution(std::size_t n1, std::size_t n2) {
  const std::size_t width = n1 * n2 + 1;
  std::vector<std::vector<double>> row(n1 + 1, std::vector<double>(width, 0.0));
  for (auto& r : row) r[0] = 1.0;  // n = 0: U is always 0
  for (std::size_t n = 1; n <= n2; ++n) {
    // row[0] stays the point mass at 0; update m ascending so row[m-1] is
    // already at column n.
    for (std::size_t m = 1; m <= n1; ++m) {
      const double wa = static_cast<double>(m) / static_cast<double>(m + n);
      const double wb = static_cast<double>(n) / static_cast<double>(m + n);
      std::vector<double> next(width, 0.0);
      const std::size_t top = m * n;
      for (std::size_t u = 0; u <= top; ++u) {
        double v = wb * row[m][u];
        if (u >= n) v += wa * row[m - 1][u - n];
        next[u] = v;
      }
      row[m] = std::move(next);
    }
  }
  return row[n1];
}

double exact_upper_tail(std::size_t n1, std::size_t n2, double u) {
  const std::vector<double> dist = exact_u_distribution(n1, n2);
  const auto start = static_cast<std::size_t>(std::max(0.0, std::ceil(u - 1e-9)));
  double p = 0;
  for (std::size_t k = start; k < dist.size(); ++k) p += dist[k];
  return std::clamp(p, 0.0, 1.0);
}

namespace {

double tie_corrected_sigma(std::size_t n1, std::size_t n2, double tie_term) {
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  const double n = a + b;
  double var = a * b / 12.0 * ((n + 1.0) - (n > 1 ? tie_term / (n * (n - 1.0)) : 0.0));
  return var > 0 ? std::sqrt(var) : 0.0;
}

}  // namespace

double normal_upper_tail(std::size_t n1, std::size_t n2, double u, double tie_term) {
  const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  const double sigma = tie_corrected_sigma(n1, n2, tie_term);
  if (sigma == 0) return u > mu ? 0.0 : (u < mu ? 1.0 : 0.5);
  const double z = (u - mu - 0.5) / sigma;
  return std::clamp(0.5 * std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

StatResult mann_whitney_one_sided(std::span<const double> treatment,
                                  std::span<const double> control,
                                  const MannWhitneyOptions& options) {
  if (treatment.empty() || control.empty()) {
    throw InputError("Mann-Whitney U needs two non-empty samples");
  }
  const std::size_t n1 = treatment.size();
  const std::size_t n2 = control.size();
  std::vector<double> pooled(treatment.begin(), treatment.end());
  pooled.insert(pooled.end(), control.begin(), control.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw InputError("Mann-Whitney U sample contains a non-finite value");
  }
  const std::vector<double> ranks = midranks(pooled);

  double rank_sum = 0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum += ranks[i];
  const double d1 = static_cast<double>(n1);
  const double d2 = static_cast<double>(n2);

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0;
  bool ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  StatResult res;
  res.n_treatment = n1;
  res.n_control = n2;
  res.u_statistic = rank_sum - d1 * (d1 + 1.0) / 2.0;
  res.effect_size_r = std::clamp(2.0 * res.u_statistic / (d1 * d2) - 1.0, -1.0, 1.0);

  if (sorted.front() == sorted.back()) {
    res.effect_size_r = 0;
    res.p_value = 0.5;
    res.p_two_sided = 1.0;
    res.method = StatMethod::kNormalApprox;
    res.size_label = SizeLabel::kNegligible;
    return res;
  }

  const std::size_t cutoff = std::min(options.exact_cutoff, kMaxExactCutoff);
  if (!ties && n1 * n2 <= cutoff) {
    res.method = StatMethod::kExact;
    const std::vector<double> dist = exact_u_distribution(n1, n2);
    const auto u = static_cast<std::size_t>(std::llround(res.u_statistic));
    double upper = 0, lower = 0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      if (k >= u) upper += dist[k];
      if (k <= u) lower += dist[k];
    }
    res.p_value = std::clamp(upper, 0.0, 1.0);
    res.p_two_sided = std::clamp(2.0 * std::min(upper, lower), 0.0, 1.0);
  } else {
    res.method = StatMethod::kNormalApprox;
    res.p_value = normal_upper_tail(n1, n2, res.u_statistic, tie_term);
    const double mu = d1 * d2 / 2.0;
    const double sigma = tie_corrected_sigma(n1, n2, tie_term);
    const double dev = std::fabs(res.u_statistic - mu) - 0.5;
    res.p_two_sided = dev <= 0 ? 1.0 : std::min(1.0, std::erfc(dev / sigma / std::sqrt(2.0)));
  }
  res.size_label = effect_size_label(res.effect_size_r);
  return res;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InputError("mean of an empty sample");
  // Sorted summation keeps the result independent of input order.
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace echoaudit
