#ifndef MIDZUNO_MONTECARLO_HPP
#define MIDZUNO_MONTECARLO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "midzuno/designs.hpp"
#include "midzuno/population.hpp"

namespace midzuno {

enum class Design { si, mi, coupled };

/// Which inclusion probabilities feed Yhat and Xhat inside the variance
/// estimators. `design` uses the probabilities of the design that drew the
/// sample (Midzuno pi for MI samples); `si` always uses n / N.
enum class PlugIn { design, si };

/// Point estimator of R on the drawn sample. `ht` is Yhat / Xhat with the
/// design's pi; `sample_sums` is sum_S y / sum_S x, exactly unbiased under
/// Midzuno with p proportional to x. The two coincide under SI.
enum class RatioForm { ht, sample_sums };

std::string to_string(Design d);
std::string to_string(PlugIn p);
std::string to_string(RatioForm r);

struct SimConfig {
  std::optional<PopulationSpec> population_spec;
  std::optional<std::filesystem::path> population_file;
  Design design = Design::mi;
  std::vector<std::size_t> sample_sizes{20, 40, 60, 80, 100, 200, 500};
  std::size_t replicates = 20000;   // B
  std::size_t mse_runs = 100000;
  double alpha = 0.025;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  PlugIn variance_pi = PlugIn::design;
  RatioForm ratio_estimator = RatioForm::ht;

  /// Throws std::invalid_argument naming the offending field. Pass the
  /// population size to also check every n <= N. Returns non-fatal warnings.
  std::vector<std::string> validate(std::optional<std::size_t> N = {}) const;
};

SimConfig sim_config_from_json(const std::string& text);
std::string sim_config_to_json(const SimConfig& config);
SimConfig load_sim_config(const std::filesystem::path& path);

// Population named by the config: loaded from file or generated from spec.
Population load_population(const SimConfig& config);

struct ReplicateRecord {
  std::size_t index = 0;
  double total = 0.0;         // Yhat
  double ratio = 0.0;         // Rhat
  double var_total = 0.0;     // Vhat(Yhat)
  double var_ratio = 0.0;     // Vhat_lin(Rhat)
  bool covers_total = false;
  bool covers_ratio = false;
  // Coupled design only: estimates from the SI side of the pair.
  double si_total = 0.0;
  double si_ratio = 0.0;
  bool samples_equal = false;

  friend bool operator==(const ReplicateRecord&,
                         const ReplicateRecord&) = default;
};

/// Thrown when a replicate fails; carries the replicate index.
class ReplicateError : public std::runtime_error {
 public:
  ReplicateError(std::size_t index, const std::string& what)
      : std::runtime_error("replicate " + std::to_string(index) + ": " + what),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Runs config.replicates independent draws at sample size n. Record b is
/// computed from a stream keyed on (master_seed, n, b) only, so the output
/// does not depend on config.workers. First-draw probabilities are p_k
/// proportional to x_k.
std::vector<ReplicateRecord> run_replications(const Population& pop,
                                              const SimConfig& config,
                                              std::size_t n);

struct MseEstimate {
  double mse_total = 0.0;
  double mse_ratio = 0.0;
};

/// Monte Carlo MSE of Yhat and Rhat over config.mse_runs draws, on a stream
/// family independent of run_replications (master seed XOR a fixed tag).
MseEstimate approximate_mse(const Population& pop, const SimConfig& config,
                            std::size_t n);

// 100 (mean(estimates) - theta) / theta
double relative_bias(std::span<const double> estimates, double theta);
// 100 (mean(v) - mse) / mse
double variance_rb(std::span<const double> variance_estimates, double mse);
// 100 sqrt(mean((v - mse)^2)) / mse
double variance_rrmse(std::span<const double> variance_estimates, double mse);

enum class Target { total, ratio };
// Percentage of records whose interval contains the true parameter.
double coverage_rate(std::span<const ReplicateRecord> records, Target which);

/// Kolmogorov-Smirnov distance between the empirical law of `values` and
/// the standard normal.
double ks_statistic_normal(std::vector<double> values);

/// Pearson chi-square of observed counts against expected probabilities.
double chi_square(std::span<const std::uint64_t> counts,
                  std::span<const double> probabilities);

struct SimResult {
  std::size_t n = 0;
  double rb_total = 0.0;
  double rb_var_total = 0.0;
  double rrmse_var_total = 0.0;
  double cov_total = 0.0;
  double rb_ratio = 0.0;
  double rb_var_ratio = 0.0;
  double rrmse_var_ratio = 0.0;
  double cov_ratio = 0.0;
  // Diagnostics, reported alongside in the full-precision output.
  double mse_total = 0.0;
  double mse_ratio = 0.0;
  double var_total_analytic = 0.0;  // N (N - n) / n S_y^2
  double var_ratio_analytic = 0.0;  // N (N - n) / (n X^2) S_z^2
};

/// Assembles one Table 1 row from finished replicates and the MSE baseline.
SimResult summarize(const Population& pop, std::size_t n,
                    std::span<const ReplicateRecord> records,
                    const MseEstimate& mse);

using ProgressFn = std::function<void(const SimResult&, double seconds)>;

/// One SimResult per config.sample_sizes entry, in order.
std::vector<SimResult> reproduce_table(const Population& pop,
                                       const SimConfig& config,
                                       const ProgressFn& progress = {});

// Nine Table 1 columns, one decimal, round half away from zero.
std::string table_csv_rounded(std::span<const SimResult> rows);
// Same columns at 17 significant digits, plus the diagnostic columns.
std::string table_csv_full(std::span<const SimResult> rows);
// Per-replicate records for one n. Header row only when with_header.
std::string replicates_csv(std::span<const ReplicateRecord> records,
                           std::size_t n, Design design,
                           bool with_header = true);

void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

/// Calls body(i) for i in [0, count) on up to `workers` threads. Exceptions
/// from body are rethrown on the caller, lowest index first.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace midzuno

#endif  // MIDZUNO_MONTECARLO_HPP
