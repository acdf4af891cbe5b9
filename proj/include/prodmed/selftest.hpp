#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prodmed::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline constexpr std::uint64_t kDefaultSeed = 20240601;

/// Second alpha-differences of d_alpha are <= 1e-10 on random (m, z) pairs.
[[nodiscard]] CheckResult concavity(std::uint64_t seed = kDefaultSeed, int fixtures = 1000);

/// Grid-profiled minimum equals the smaller endpoint profile within 1e-6.
[[nodiscard]] CheckResult endpoint_identity(std::uint64_t seed = kDefaultSeed, int datasets = 20);

/// Chart coordinates of -psi match central differences of d_alpha, relative error < 1e-4.
[[nodiscard]] CheckResult score_gradient(std::uint64_t seed = kDefaultSeed, int fixtures = 1000);

/// H_n is nondecreasing on a 200-point grid and bisection agrees with a 1e-4 grid scan.
[[nodiscard]] CheckResult balance_monotonicity(std::uint64_t seed = kDefaultSeed, int samples = 100);

/// Calibrated location drift <= 1e-9 under random unit rescaling when truncation does not bind.
[[nodiscard]] CheckResult calibration_equivariance(std::uint64_t seed = kDefaultSeed, int trials = 20);

/// BW closed forms, log/exp round trips, Weiszfeld descent and a 400 x 400 grid search.
[[nodiscard]] CheckResult geometry_oracles(std::uint64_t seed = kDefaultSeed);

/// Small experiment runs are byte-identical across 1, 4 and 8 worker threads.
[[nodiscard]] CheckResult determinism(std::uint64_t seed = kDefaultSeed);

[[nodiscard]] std::vector<CheckResult> run_all(std::uint64_t seed = kDefaultSeed);

}  // namespace prodmed::selftest
