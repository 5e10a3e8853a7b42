#include "midzuno/estimators.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace midzuno {

namespace {

// Shared factor N (N - n) / n of the SI variance formulas.
double si_factor(std::size_t N, std::size_t n) {
  const auto Nd = static_cast<double>(N);
  const auto nd = static_cast<double>(n);
  return Nd * (Nd - nd) / nd;
}

void check_n(const Population& pop, std::size_t n, const char* who) {
  if (n < 1 || n > pop.size()) {
    throw std::invalid_argument(std::string(who) + ": need 1 <= n <= N");
  }
}

}  // namespace

EstimateContext::EstimateContext(const Population& pop, const Sample& sample,
                                 std::span<const double> pi)
    : pop_(&pop), sample_(&sample), pi_(pi) {
  if (sample.population_size() != pop.size()) {
    throw std::invalid_argument("estimate context: sample drawn from a "
                                "population of different size");
  }
  if (pi.size() != pop.size()) {
    throw std::invalid_argument("estimate context: pi must have length N");
  }
  for (Unit k : sample) {
    if (!(pi[k] > 0.0) || pi[k] > 1.0 + 1e-12) {
      throw std::invalid_argument("estimate context: pi[" + std::to_string(k) +
                                  "] must lie in (0, 1]");
    }
  }
}

std::vector<double> srswor_inclusion_probabilities(std::size_t N,
                                                   std::size_t n) {
  if (n < 1 || n > N) {
    throw std::invalid_argument("srswor_inclusion_probabilities: need 1 <= n <= N");
  }
  return std::vector<double>(N, static_cast<double>(n) / static_cast<double>(N));
}

double ht_total(const EstimateContext& ctx, Variable which) {
  const auto values =
      which == Variable::y ? ctx.population().y() : ctx.population().x();
  double total = 0.0;
  for (Unit k : ctx.sample()) total += values[k] / ctx.pi()[k];
  return total;
}

double ratio_estimate(const EstimateContext& ctx) {
  return ht_total(ctx, Variable::y) / ht_total(ctx, Variable::x);
}

double midzuno_ratio_estimate(const Population& pop, const Sample& sample) {
  if (sample.population_size() != pop.size()) {
    throw std::invalid_argument("midzuno_ratio_estimate: sample drawn from a "
                                "population of different size");
  }
  double sy = 0.0;
  double sx = 0.0;
  for (Unit k : sample) {
    sy += pop.y()[k];
    sx += pop.x()[k];
  }
  return sy / sx;
}

double var_ht_si_true(const Population& pop, std::size_t n) {
  check_n(pop, n, "var_ht_si_true");
  return si_factor(pop.size(), n) * population_parameters(pop).dispersion_y;
}

double var_ht_si_estimate(const EstimateContext& ctx) {
  const Sample& s = ctx.sample();
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("var_ht_si_estimate: need n >= 2");
  const std::size_t N = ctx.population().size();
  const double centre = ht_total(ctx, Variable::y) / static_cast<double>(N);
  double ss = 0.0;
  for (Unit k : s) {
    const double d = ctx.population().y()[k] - centre;
    ss += d * d;
  }
  return si_factor(N, n) * ss / static_cast<double>(n - 1);
}

double var_lin_ratio_true(const Population& pop, std::size_t n) {
  check_n(pop, n, "var_lin_ratio_true");
  const auto params = population_parameters(pop);
  return si_factor(pop.size(), n) * params.dispersion_z /
         (params.total_x * params.total_x);
}

double var_lin_ratio_estimate(const EstimateContext& ctx,
                              std::optional<double> ratio) {
  const Sample& s = ctx.sample();
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("var_lin_ratio_estimate: need n >= 2");
  const std::size_t N = ctx.population().size();
  const double x_hat = ht_total(ctx, Variable::x);
  const double r_hat = ratio ? *ratio : ht_total(ctx, Variable::y) / x_hat;
  const auto x = ctx.population().x();
  const auto y = ctx.population().y();

  double mean = 0.0;
  for (Unit k : s) mean += y[k] - r_hat * x[k];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (Unit k : s) {
    const double d = y[k] - r_hat * x[k] - mean;
    ss += d * d;
  }
  return si_factor(N, n) * ss / static_cast<double>(n - 1) / (x_hat * x_hat);
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::invalid_argument("normal_quantile: probability must be in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;

  double x;
  if (prob < low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - low) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement against the erfc-based CDF.
  const double e = normal_cdf(x) - prob;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

Interval confidence_interval(double point, double variance_estimate,
                             double alpha) {
  if (variance_estimate < 0.0 || std::isnan(variance_estimate)) {
    throw std::invalid_argument("confidence_interval: negative variance estimate");
  }
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw std::invalid_argument("confidence_interval: alpha must lie in (0, 0.5)");
  }
  const double u = alpha == 0.025 ? kNormalQuantile975 : normal_quantile(1.0 - alpha);
  const double half = u * std::sqrt(variance_estimate);
  return {point - half, point + half};
}

}  // namespace midzuno
