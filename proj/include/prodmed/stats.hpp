#pragma once

#include <span>
#include <vector>

namespace prodmed::stats {

/// Order statistic ceil(n/2) (1-based): the lower of the two middle values for even n.
[[nodiscard]] double lower_median(std::span<const double> x);
/// Conventional median (midpoint of the middle pair for even n).
[[nodiscard]] double median(std::span<const double> x);
/// Linear-interpolation quantile (R type 7), p in [0,1].
[[nodiscard]] double quantile(std::span<const double> x, double p);
[[nodiscard]] double mean(std::span<const double> x);
/// Standard deviation with divisor n - 1 (0 for a single value).
[[nodiscard]] double sample_sd(std::span<const double> x);
[[nodiscard]] double root_mean_square(std::span<const double> x);

/// 0.9 min(sd, IQR/1.34) n^{-1/5}; falls back to whichever spread is positive.
[[nodiscard]] double silverman_bandwidth(std::span<const double> x);
/// Gaussian kernel density estimate at `at`.
[[nodiscard]] double gaussian_kde(std::span<const double> x, double at, double bandwidth);

}  // namespace prodmed::stats
