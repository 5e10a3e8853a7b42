// Command-line front end: population generation, design diagnostics, coupling
// probes and the Table 1 pipeline.
//
// Exit codes: 0 success, 1 usage or input error, 2 tolerance failure,
// 3 I/O error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include <CLI11.hpp>

#include "midzuno/designs.hpp"
#include "midzuno/errors.hpp"
#include "midzuno/estimators.hpp"
#include "midzuno/montecarlo.hpp"
#include "midzuno/population.hpp"

namespace {

using namespace midzuno;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTolerance = 2;
constexpr int kExitIo = 3;

constexpr double kExactTolerance = 1e-10;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> mse_runs;
  std::vector<std::size_t> sample_sizes;
  std::optional<double> alpha;
  std::string out;
  std::string full_out;
};

void apply(const Overrides& o, SimConfig& c) {
  if (o.seed) c.master_seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.replicates) c.replicates = *o.replicates;
  if (o.mse_runs) c.mse_runs = *o.mse_runs;
  if (!o.sample_sizes.empty()) c.sample_sizes = o.sample_sizes;
  if (o.alpha) c.alpha = *o.alpha;
}

void add_sim_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed (u64)");
  cmd->add_option("--workers", o.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--B", o.replicates, "Replications per n");
  cmd->add_option("--mse-runs", o.mse_runs, "Replications of the MSE baseline");
  cmd->add_option("--n", o.sample_sizes, "Sample sizes, comma separated")
      ->delimiter(',');
  cmd->add_option("--alpha", o.alpha, "One-tailed error rate (default 0.025)");
}

// `uniform`, `0.1,0.2,...` or `prop-x:<population csv>`. Also returns the
// population when one was named.
struct DrawSpec {
  DrawProbabilities p;
  std::optional<Population> pop;
};

DrawSpec parse_p_spec(const std::string& spec, std::optional<std::size_t> N) {
  if (spec == "uniform") {
    if (!N) throw std::invalid_argument("--p uniform needs --N");
    return {DrawProbabilities::uniform(*N), std::nullopt};
  }
  if (spec.rfind("prop-x:", 0) == 0) {
    Population pop = load_population_csv(spec.substr(7));
    if (N && *N != pop.size()) {
      throw std::invalid_argument("--N does not match the population file");
    }
    DrawProbabilities p(std::vector<double>(pop.x().begin(), pop.x().end()));
    return {std::move(p), std::move(pop)};
  }
  std::vector<double> w;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      w.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("--p: cannot parse '" + item + "'");
    }
  }
  if (N && *N != w.size()) {
    throw std::invalid_argument("--N does not match the length of --p");
  }
  return {DrawProbabilities(std::move(w)), std::nullopt};
}

// Fixture for the exact ratio check when no population is given: p ∝ x.
Population synthetic_population(const DrawProbabilities& p) {
  std::vector<double> x(p.size());
  std::vector<double> y(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    x[k] = p[k] * static_cast<double>(p.size());
    y[k] = static_cast<double>((k + 1) * (k + 1));
  }
  return Population(std::move(x), std::move(y));
}

int cmd_gen_pop(const std::string& spec_path, const Overrides& o) {
  PopulationSpec spec = load_population_spec(spec_path);
  if (o.seed) spec.seed = *o.seed;
  const Population pop = generate_population(spec);
  save_population_csv(pop, o.out);
  const auto params = population_parameters(pop);
  std::printf("N   = %zu\n", pop.size());
  std::printf("Y   = %.17g\n", params.total_y);
  std::printf("X   = %.17g\n", params.total_x);
  std::printf("R   = %.17g\n", params.ratio);
  std::printf("Sy2 = %.17g\n", params.dispersion_y);
  std::printf("Sz2 = %.17g\n", params.dispersion_z);
  std::printf("R2  = %.6f (target %.6f)\n", realized_r2(pop), spec.target_r2);
  return kExitOk;
}

SimConfig load_config(const std::string& path, const Overrides& o) {
  SimConfig c = load_sim_config(path);
  apply(o, c);
  for (const auto& w : c.validate()) std::cerr << "warning: " << w << '\n';
  return c;
}

int cmd_simulate(const std::string& config_path, const Overrides& o) {
  const SimConfig c = load_config(config_path, o);
  const Population pop = load_population(c);
  c.validate(pop.size());
  const auto params = population_parameters(pop);
  std::string csv;
  bool first = true;
  for (std::size_t n : c.sample_sizes) {
    const auto records = run_replications(pop, c, n);
    csv += replicates_csv(records, n, c.design, first);
    first = false;
    std::vector<double> totals, ratios;
    for (const auto& r : records) {
      totals.push_back(r.total);
      ratios.push_back(r.ratio);
    }
    std::printf("n=%zu  RB(Y)=%.3f%%  RB(R)=%.3f%%  cov(Y)=%.2f%%  cov(R)=%.2f%%\n",
                n, relative_bias(totals, params.total_y),
                relative_bias(ratios, params.ratio),
                coverage_rate(records, Target::total),
                coverage_rate(records, Target::ratio));
  }
  if (!o.out.empty()) write_text_file(o.out, csv);
  return kExitOk;
}

int cmd_table1(const std::string& config_path, const Overrides& o) {
  const SimConfig c = load_config(config_path, o);
  const Population pop = load_population(c);
  const auto rows = reproduce_table(pop, c, [](const SimResult& r, double s) {
    std::printf("n=%zu done in %.2f s\n", r.n, s);
    std::fflush(stdout);
  });
  const std::string rounded = table_csv_rounded(rows);
  std::cout << rounded;
  if (!o.out.empty()) write_text_file(o.out, rounded);
  std::string full_out = o.full_out;
  if (full_out.empty() && !o.out.empty()) {
    std::filesystem::path p(o.out);
    full_out = (p.parent_path() / (p.stem().string() + "_full.csv")).string();
  }
  if (!full_out.empty()) write_text_file(full_out, table_csv_full(rows));
  return kExitOk;
}

int cmd_check_design(std::optional<std::size_t> N, std::size_t n,
                     const std::string& p_spec, const std::string& out) {
  DrawSpec draw = parse_p_spec(p_spec, N);
  const DrawProbabilities& p = draw.p;
  const DesignDistribution design = enumerate_midzuno(p, n);

  const auto enumerated = design.inclusion_probabilities();
  const auto closed_form = midzuno_inclusion_probabilities(p, n);
  double pi_dev = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    pi_dev = std::max(pi_dev, std::abs(enumerated[k] - closed_form[k]));
  }
  const double mass_dev = std::abs(design.total_mass() - 1.0);

  const Population pop =
      draw.pop ? std::move(*draw.pop) : synthetic_population(p);
  const double ratio = population_parameters(pop).ratio;
  const double expected_ratio = design.expectation([&](const auto& members) {
    return midzuno_ratio_estimate(pop, Sample(members, pop.size()));
  });
  // The ratio check needs p proportional to x; say so when it is not.
  double prop_dev = 0.0;
  const auto params = population_parameters(pop);
  for (std::size_t k = 0; k < p.size(); ++k) {
    prop_dev = std::max(prop_dev, std::abs(p[k] - pop.x()[k] / params.total_x));
  }

  const double uniform_mass = 1.0 / static_cast<double>(design.subset_count());
  double si_dev = 0.0;
  for (std::uint64_t r = 0; r < design.subset_count(); ++r) {
    si_dev = std::max(si_dev, std::abs(design.probability_at(r) - uniform_mass));
  }

  std::printf("N=%zu n=%zu subsets=%zu\n", p.size(), n, design.subset_count());
  std::printf("max |pi_enumerated - pi_closed_form| = %.3e\n", pi_dev);
  std::printf("|total mass - 1|                     = %.3e\n", mass_dev);
  std::printf("E[R_MI] - R                          = %.3e\n",
              expected_ratio - ratio);
  std::printf("max |P(S) - 1/C(N,n)|                = %.3e%s\n", si_dev,
              si_dev <= kExactTolerance ? "  (design identical to SI)" : "");
  if (!draw.pop) {
    std::printf("ratio check used the fixture x = N p, y_k = (k+1)^2\n");
  }
  if (!out.empty()) save_design_csv(design, out);

  bool ok = pi_dev <= kExactTolerance && mass_dev <= kExactTolerance;
  if (prop_dev <= 1e-12) {
    ok = ok && std::abs(expected_ratio - ratio) <= kExactTolerance;
  } else {
    std::printf("p is not proportional to x; ratio residual not checked\n");
  }
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitTolerance;
}

int cmd_probe_coupling(std::optional<std::size_t> N, std::size_t n,
                       const std::string& p_spec, std::size_t B,
                       std::uint64_t seed, std::size_t workers) {
  DrawSpec draw = parse_p_spec(p_spec, N);
  const DrawProbabilities& p = draw.p;
  const std::size_t pop_size = p.size();
  if (n < 1 || n > pop_size) throw std::invalid_argument("--n: need 1 <= n <= N");
  bool ok = true;

  if (pop_size <= 6) {
    const auto joint = enumerate_coupling(p, n);
    const auto si = joint.si_marginal();
    const auto mi = joint.mi_marginal();
    const auto reference = enumerate_midzuno(p, n);
    const double uniform_mass = 1.0 / static_cast<double>(si.subset_count());
    double si_dev = 0.0;
    double mi_dev = 0.0;
    for (std::uint64_t r = 0; r < si.subset_count(); ++r) {
      si_dev = std::max(si_dev, std::abs(si.probability_at(r) - uniform_mass));
      mi_dev = std::max(mi_dev, std::abs(mi.probability_at(r) -
                                         reference.probability_at(r)));
    }
    std::printf("exact: max |P_SI(S) - 1/C(N,n)|      = %.3e\n", si_dev);
    std::printf("exact: max |P_MI(S) - Midzuno law|   = %.3e\n", mi_dev);
    std::printf("exact: P(s_mi = s_si)                = %.17g\n",
                joint.agreement_probability());
    ok = ok && si_dev <= kExactTolerance && mi_dev <= kExactTolerance;
  }

  if (B > 0) {
    std::vector<std::optional<CoupledDraw>> slots(B);
    parallel_for(B, workers, [&](std::size_t b) {
      RandomStream rng(derive_seed(seed, n, b));
      slots[b] = coupled_sample(p, n, rng);
    });
    std::size_t equal = 0;
    for (const auto& d : slots) equal += d->s_mi == d->s_si;
    std::printf("empirical: B=%zu  P(s_mi = s_si) = %.6f  (lower bound n/N = %.6f)\n",
                B, static_cast<double>(equal) / static_cast<double>(B),
                static_cast<double>(n) / static_cast<double>(pop_size));

    const std::uint64_t subsets = binomial(pop_size, n);
    if (subsets > 1 && subsets <= kEnumerationLimit) {
      const auto reference = enumerate_midzuno(p, n);
      const auto uniform = enumerate_srswor(pop_size, n);
      std::vector<std::uint64_t> mi_counts(subsets, 0);
      std::vector<std::uint64_t> si_counts(subsets, 0);
      for (const auto& d : slots) {
        ++mi_counts[reference.rank(d->s_mi.members())];
        ++si_counts[reference.rank(d->s_si.members())];
      }
      std::vector<double> mi_probs(subsets);
      std::vector<double> si_probs(subsets);
      for (std::uint64_t r = 0; r < subsets; ++r) {
        mi_probs[r] = reference.probability_at(r);
        si_probs[r] = uniform.probability_at(r);
      }
      const double df = static_cast<double>(subsets - 1);
      const double critical = boost::math::quantile(
          boost::math::chi_squared_distribution<double>(df), 0.999);
      const double chi_mi = chi_square(mi_counts, mi_probs);
      const double chi_si = chi_square(si_counts, si_probs);
      std::printf("empirical: chi2(s_si vs SI)      = %.3f\n", chi_si);
      std::printf("empirical: chi2(s_mi vs Midzuno) = %.3f\n", chi_mi);
      std::printf("empirical: 0.999 quantile, df=%.0f = %.3f\n", df, critical);
      ok = ok && chi_si <= critical && chi_mi <= critical;
    } else if (subsets > kEnumerationLimit) {
      // Too many subsets to bin; compare unit inclusion frequencies instead.
      std::vector<double> mi_freq(pop_size, 0.0);
      std::vector<double> si_freq(pop_size, 0.0);
      for (const auto& d : slots) {
        for (Unit k : d->s_mi) mi_freq[k] += 1.0;
        for (Unit k : d->s_si) si_freq[k] += 1.0;
      }
      const auto pi_mi = midzuno_inclusion_probabilities(p, n);
      const double pi_si = static_cast<double>(n) / static_cast<double>(pop_size);
      double z_max = 0.0;
      const auto b = static_cast<double>(B);
      for (std::size_t k = 0; k < pop_size; ++k) {
        const double sd_mi = std::sqrt(pi_mi[k] * (1 - pi_mi[k]) / b);
        const double sd_si = std::sqrt(pi_si * (1 - pi_si) / b);
        if (sd_mi > 0) z_max = std::max(z_max, std::abs(mi_freq[k] / b - pi_mi[k]) / sd_mi);
        if (sd_si > 0) z_max = std::max(z_max, std::abs(si_freq[k] / b - pi_si) / sd_si);
      }
      std::printf("empirical: max |z| of unit inclusion frequencies = %.3f\n",
                  z_max);
    }
  }
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Midzuno and simple random sampling toolkit"};
  app.require_subcommand(1);

  Overrides o;
  std::string input;

  auto* gen = app.add_subcommand("gen-pop", "Generate a synthetic population");
  gen->add_option("spec", input, "Population spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", o.out, "Population CSV to write")->required();
  gen->add_option("--seed", o.seed, "Override the spec seed");

  auto* sim = app.add_subcommand("simulate", "Run replications, write per-replicate records");
  sim->add_option("config", input, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", o.out, "Records CSV");
  add_sim_flags(sim, o);

  auto* table = app.add_subcommand("table1", "Reproduce the simulation table");
  table->add_option("config", input, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  table->add_option("--out", o.out, "One-decimal CSV");
  table->add_option("--full-precision-out", o.full_out, "Full-precision CSV");
  add_sim_flags(table, o);

  std::optional<std::size_t> N;
  std::size_t n = 0;
  std::string p_spec = "uniform";
  std::string design_out;
  auto* check = app.add_subcommand("check-design", "Exact Midzuno design diagnostics");
  check->add_option("--N", N, "Population size");
  check->add_option("--n", n, "Sample size")->required();
  check->add_option("--p", p_spec, "uniform | p1,p2,... | prop-x:<population csv>");
  check->add_option("--out", design_out, "Write the design as sample,probability CSV");

  std::size_t probe_B = 100000;
  std::uint64_t probe_seed = 1;
  std::size_t probe_workers = 1;
  auto* probe = app.add_subcommand("probe-coupling", "Check the MI/SI coupling");
  probe->add_option("--N", N, "Population size");
  probe->add_option("--n", n, "Sample size")->required();
  probe->add_option("--p", p_spec, "uniform | p1,p2,... | prop-x:<population csv>");
  probe->add_option("--B", probe_B, "Empirical draws (0 skips)");
  probe->add_option("--seed", probe_seed, "Seed");
  probe->add_option("--workers", probe_workers, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_pop(input, o);
    if (*sim) return cmd_simulate(input, o);
    if (*table) return cmd_table1(input, o);
    if (*check) return cmd_check_design(N, n, p_spec, design_out);
    if (*probe) {
      return cmd_probe_coupling(N, n, p_spec, probe_B, probe_seed, probe_workers);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
