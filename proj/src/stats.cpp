#include "prodmed/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "prodmed/error.hpp"

namespace prodmed::stats {
namespace {

void require_nonempty(std::span<const double> x) {
  if (x.empty()) throw InputError("statistic of an empty sample");
}

std::vector<double> sorted(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double lower_median(std::span<const double> x) {
  require_nonempty(x);
  std::vector<double> v(x.begin(), x.end());
  const std::size_t k = (v.size() + 1) / 2 - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

double median(std::span<const double> x) {
  require_nonempty(x);
  const auto v = sorted(x);
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile(std::span<const double> x, double p) {
  require_nonempty(x);
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must lie in [0,1]");
  const auto v = sorted(x);
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(std::span<const double> x) {
  require_nonempty(x);
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  require_nonempty(x);
  if (x.size() == 1) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double root_mean_square(std::span<const double> x) {
  require_nonempty(x);
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

double silverman_bandwidth(std::span<const double> x) {
  require_nonempty(x);
  const double sd = sample_sd(x);
  const double iqr = (quantile(x, 0.75) - quantile(x, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = std::max(sd, iqr);
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

double gaussian_kde(std::span<const double> x, double at, double bandwidth) {
  require_nonempty(x);
  if (!(bandwidth > 0.0)) throw NumericalError("kernel bandwidth must be positive");
  double s = 0.0;
  for (double v : x) {
    const double z = (at - v) / bandwidth;
    s += std::exp(-0.5 * z * z);
  }
  return s / (static_cast<double>(x.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace prodmed::stats
