#ifndef MIDZUNO_ESTIMATORS_HPP
#define MIDZUNO_ESTIMATORS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "midzuno/designs.hpp"
#include "midzuno/population.hpp"

namespace midzuno {

/// A drawn sample together with the inclusion probabilities of the design
/// that produced it. The caller guarantees pi matches that design; only the
/// sampled entries are read. Holds references, so it must not outlive pop,
/// sample or pi.
class EstimateContext {
 public:
  EstimateContext(const Population& pop, const Sample& sample,
                  std::span<const double> pi);

  const Population& population() const noexcept { return *pop_; }
  const Sample& sample() const noexcept { return *sample_; }
  std::span<const double> pi() const noexcept { return pi_; }

 private:
  const Population* pop_;
  const Sample* sample_;
  std::span<const double> pi_;
};

enum class Variable { y, x };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

// pi_k = n / N for every unit.
std::vector<double> srswor_inclusion_probabilities(std::size_t N,
                                                   std::size_t n);

// Horvitz-Thompson total: sum over the sample of v_k / pi_k.
double ht_total(const EstimateContext& ctx, Variable which);

// Substitution estimator Yhat / Xhat.
double ratio_estimate(const EstimateContext& ctx);

/// Midzuno's ratio estimator sum_S y_k / sum_S x_k. Exactly unbiased for R
/// on Midzuno samples drawn with p_k proportional to x_k. The HT substitution
/// ratio with Midzuno pi is not exactly unbiased (only asymptotically), since
/// its unit weights vary with p_k. Under SI the two coincide.
double midzuno_ratio_estimate(const Population& pop, const Sample& sample);

// N (N - n) / n * S_y^2
double var_ht_si_true(const Population& pop, std::size_t n);

/// N (N - n) / n * s_y^2, s_y^2 = sum_S (y_k - Yhat/N)^2 / (n - 1), with Yhat
/// the HT total under ctx.pi(). Under SI this is the unbiased estimator of
/// var_ht_si_true; on a Midzuno sample it is the same formula applied
/// verbatim with the Midzuno Yhat as centre.
double var_ht_si_estimate(const EstimateContext& ctx);

// N (N - n) / (n X^2) * S_z^2
double var_lin_ratio_true(const Population& pop, std::size_t n);

/// N (N - n) / (n Xhat^2) * s_zhat^2 with zhat_k = y_k - Rhat x_k and s_zhat^2
/// the sample variance of zhat (sample-mean centering, divisor n - 1). Xhat
/// uses ctx.pi(). Rhat defaults to ratio_estimate(ctx); pass `ratio` to build
/// the residuals around another point estimate of R.
double var_lin_ratio_estimate(const EstimateContext& ctx,
                              std::optional<double> ratio = std::nullopt);

/// Standard normal quantile. Acklam's rational approximation refined by one
/// Halley step; absolute error well below 1e-12 on (1e-300, 1 - 1e-16).
double normal_quantile(double prob);

// Standard normal CDF.
double normal_cdf(double z);

// u_{0.975}
inline constexpr double kNormalQuantile975 = 1.959963984540054;

/// point -/+ u_{1-alpha} sqrt(variance_estimate). alpha in (0, 0.5).
Interval confidence_interval(double point, double variance_estimate,
                             double alpha);

}  // namespace midzuno

#endif  // MIDZUNO_ESTIMATORS_HPP
