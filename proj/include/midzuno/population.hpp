#ifndef MIDZUNO_POPULATION_HPP
#define MIDZUNO_POPULATION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace midzuno {

/// A finite population of N >= 2 units carrying a strictly positive
/// auxiliary value x_k and a study value y_k. Immutable after construction.
class Population {
 public:
  /// Throws std::invalid_argument if the lengths differ, N < 2, or any
  /// x_k is not strictly positive and finite.
  Population(std::vector<double> x, std::vector<double> y);

  std::size_t size() const noexcept { return x_.size(); }
  std::span<const double> x() const noexcept { return x_; }
  std::span<const double> y() const noexcept { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

struct PopulationParameters {
  double total_y = 0.0;      // Y
  double total_x = 0.0;      // X
  double ratio = 0.0;        // R = Y / X
  double dispersion_y = 0.0; // S_y^2, divisor N - 1
  double dispersion_z = 0.0; // S_z^2 of z_k = y_k - R x_k, divisor N - 1
};

PopulationParameters population_parameters(const Population& pop);

/// Residuals z_k = y_k - R x_k at the population ratio.
std::vector<double> linearized_residuals(const Population& pop);

/// Squared Pearson correlation of x and y.
double realized_r2(const Population& pop);

/// Parameters of the synthetic generator: x ~ Gamma(shape, scale) mapped
/// affinely onto x_range, then y = x + sigma * eps with sigma tuned so the
/// model R^2 equals target_r2.
struct PopulationSpec {
  std::size_t N = 10000;
  double gamma_shape = 2.0;
  double gamma_scale = 5.0;
  std::pair<double, double> x_range{1.0, 20.0};
  double target_r2 = 0.70;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

Population generate_population(const PopulationSpec& spec);

/// Affine min-max map sending min(v) to lo and max(v) to hi. The extreme
/// elements land exactly on lo and hi.
std::vector<double> rescale_to_range(std::span<const double> v, double lo,
                                     double hi);

/// sigma = sd(x) * sqrt((1 - r2) / r2) with sd using divisor N, so that
/// Var(x) / (Var(x) + sigma^2) == r2 for the model y = x + sigma * eps.
double sigma_for_r2(std::span<const double> x, double r2);

// CSV with header `unit,x,y`, values written with 17 significant digits.
void save_population_csv(const Population& pop,
                         const std::filesystem::path& path);
Population load_population_csv(const std::filesystem::path& path);

// Flat JSON object; x_range is a two-element array.
PopulationSpec population_spec_from_json(const std::string& text);
std::string population_spec_to_json(const PopulationSpec& spec);
PopulationSpec load_population_spec(const std::filesystem::path& path);

}  // namespace midzuno

#endif  // MIDZUNO_POPULATION_HPP
