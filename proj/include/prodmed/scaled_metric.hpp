#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "prodmed/product.hpp"

namespace prodmed {

/// Distances at or below this are treated as a coincidence with the location.
inline constexpr double kCoincidenceGuard = 1e-12;

/// Squared factor distances A = d_M(p,x)^2 and B = d_N(q,y)^2, unit scales applied.
struct FactorSquares {
  double a = 0.0;
  double b = 0.0;
};

/// psi = (u, v) / r, the unit (alpha-metric) direction from m towards z.
struct ScoreVector {
  ProductTangent direction;
  double r = 0.0;
};

struct AlphaDerivatives {
  double distance;
  double first;
  double second;
};

[[nodiscard]] FactorSquares factor_squares(const ProductGeometry& geometry, const ProductPoint& m,
                                           const ProductPoint& z);

/// {alpha A + (2 - alpha) B}^{1/2}
[[nodiscard]] double scaled_distance(ScaleValue alpha, FactorSquares s);
[[nodiscard]] double scaled_distance(ScaleValue alpha, const ProductGeometry& geometry,
                                     const ProductPoint& m, const ProductPoint& z);
/// Unit factor scales.
[[nodiscard]] double scaled_distance(ScaleValue alpha, const ProductPoint& m,
                                     const ProductPoint& z);

/// First and second alpha-derivatives of the scaled distance; nullopt when the distance
/// is within the coincidence guard.
[[nodiscard]] std::optional<AlphaDerivatives> alpha_derivatives(ScaleValue alpha, double a,
                                                                double b);

/// nullopt when z coincides with m (r <= 1e-12).
[[nodiscard]] std::optional<ScoreVector> median_score(ScaleValue alpha,
                                                      const ProductGeometry& geometry,
                                                      const ProductPoint& m,
                                                      const ProductPoint& z);
[[nodiscard]] std::optional<ScoreVector> median_score(ScaleValue alpha, const ProductPoint& m,
                                                      const ProductPoint& z);

/// Norm of a tangent at m under the alpha-scaled metric (alpha = 1 gives g_1).
[[nodiscard]] double product_norm(const ProductGeometry& geometry, const ProductPoint& m,
                                  const ProductTangent& t, double alpha);

/// (alpha A - (2-alpha) B) / (alpha A + (2-alpha) B); nullopt for a zero denominator.
[[nodiscard]] std::optional<double> balance_value(ScaleValue alpha, double a, double b);
/// 4AB / {alpha A + (2-alpha) B}^2; nullopt for a zero denominator.
[[nodiscard]] std::optional<double> balance_slope(ScaleValue alpha, double a, double b);

/// Mean of the scaled distances; throws GeometryError for an empty sample.
[[nodiscard]] double empirical_objective(ScaleValue alpha, const ProductPoint& m,
                                         const ProductSample& sample);

/// One evaluation pass at a fixed location: logarithms and squared factor distances of
/// every observation, shared by all alpha-dependent reductions at that location.
class ObservationTerms {
 public:
  ObservationTerms(const ProductSample& sample, const ProductPoint& m);

  [[nodiscard]] std::size_t size() const noexcept { return squares_.size(); }
  [[nodiscard]] const ProductPoint& location() const noexcept { return location_; }
  [[nodiscard]] const ProductGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] const FactorBase& m_base() const noexcept { return m_base_; }
  [[nodiscard]] const FactorBase& n_base() const noexcept { return n_base_; }
  [[nodiscard]] const std::vector<FactorSquares>& squares() const noexcept { return squares_; }
  [[nodiscard]] const TangentVector& u(std::size_t i) const { return u_[i]; }
  [[nodiscard]] const TangentVector& v(std::size_t i) const { return v_[i]; }

  [[nodiscard]] double objective(ScaleValue alpha) const;

  struct ScoreSum {
    ProductTangent sum;         // sum of psi_i over non-coincident observations
    double inverse_r_sum = 0;   // sum of 1 / r_i over the same observations
    std::size_t coincident = 0;
  };
  [[nodiscard]] ScoreSum score_sum(ScaleValue alpha, double guard = kCoincidenceGuard) const;

  /// Sum over observations of -(A_i - B_i) / (2 r_i^3) (u_i, v_i), the alpha-derivative
  /// of the score sum.
  [[nodiscard]] ProductTangent score_alpha_derivative_sum(ScaleValue alpha,
                                                          double guard = kCoincidenceGuard) const;

 private:
  ProductGeometry geometry_;
  ProductPoint location_;
  FactorBase m_base_;
  FactorBase n_base_;
  std::vector<FactorSquares> squares_;
  std::vector<TangentVector> u_;
  std::vector<TangentVector> v_;
};

}  // namespace prodmed
