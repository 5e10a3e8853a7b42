#include "midzuno/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "midzuno/errors.hpp"
#include "midzuno/estimators.hpp"
#include "midzuno/random.hpp"

namespace midzuno {

namespace {

// XORed into the master seed for the MSE baseline run ("MSE_ORCL").
constexpr std::uint64_t kMseStreamTag = 0x4d53455f4f52434cULL;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

// Everything a replicate needs that does not change with b.
struct ReplicateSetup {
  const Population& pop;
  DrawProbabilities p;
  std::vector<double> pi_mi;
  std::vector<double> pi_si;
  double total_y;
  double ratio;
  std::size_t n;
  Design design;
  PlugIn plug_in;
  RatioForm ratio_form;
  double alpha;

  ReplicateSetup(const Population& population, const SimConfig& config,
                 std::size_t sample_size)
      : pop(population),
        p(std::vector<double>(population.x().begin(), population.x().end())),
        pi_mi(midzuno_inclusion_probabilities(p, sample_size)),
        pi_si(srswor_inclusion_probabilities(population.size(), sample_size)),
        n(sample_size),
        design(config.design),
        plug_in(config.variance_pi),
        ratio_form(config.ratio_estimator),
        alpha(config.alpha) {
    const auto params = population_parameters(population);
    total_y = params.total_y;
    ratio = params.ratio;
  }

  std::span<const double> point_pi() const {
    return design == Design::si ? std::span<const double>(pi_si) : pi_mi;
  }
  std::span<const double> variance_pi() const {
    return plug_in == PlugIn::si ? std::span<const double>(pi_si) : point_pi();
  }
};

ReplicateRecord draw_replicate(const ReplicateSetup& setup, std::size_t b,
                               std::uint64_t stream_key, bool with_variance) {
  RandomStream rng(derive_seed(stream_key, setup.n, b));
  ReplicateRecord rec;
  rec.index = b;

  std::optional<Sample> sample;
  std::optional<Sample> si_side;
  switch (setup.design) {
    case Design::si:
      sample = srswor(setup.pop.size(), setup.n, rng);
      break;
    case Design::mi:
      sample = midzuno_sample(setup.p, setup.n, rng);
      break;
    case Design::coupled: {
      auto draw = coupled_sample(setup.p, setup.n, rng);
      sample = std::move(draw.s_mi);
      si_side = std::move(draw.s_si);
      break;
    }
  }

  const EstimateContext ctx(setup.pop, *sample, setup.point_pi());
  rec.total = ht_total(ctx, Variable::y);
  rec.ratio = setup.ratio_form == RatioForm::ht
                  ? ratio_estimate(ctx)
                  : midzuno_ratio_estimate(setup.pop, *sample);
  if (si_side) {
    const EstimateContext si_ctx(setup.pop, *si_side, setup.pi_si);
    rec.si_total = ht_total(si_ctx, Variable::y);
    rec.si_ratio = ratio_estimate(si_ctx);
    rec.samples_equal = *si_side == *sample;
  }
  if (with_variance) {
    const EstimateContext var_ctx(setup.pop, *sample, setup.variance_pi());
    rec.var_total = var_ht_si_estimate(var_ctx);
    rec.var_ratio = var_lin_ratio_estimate(var_ctx, rec.ratio);
    rec.covers_total = confidence_interval(rec.total, rec.var_total, setup.alpha)
                           .contains(setup.total_y);
    rec.covers_ratio = confidence_interval(rec.ratio, rec.var_ratio, setup.alpha)
                           .contains(setup.ratio);
  }
  return rec;
}

std::vector<ReplicateRecord> run_stream(const ReplicateSetup& setup,
                                        std::size_t count,
                                        std::uint64_t stream_key,
                                        bool with_variance,
                                        std::size_t workers) {
  std::vector<ReplicateRecord> out(count);
  parallel_for(count, workers, [&](std::size_t b) {
    try {
      out[b] = draw_replicate(setup, b, stream_key, with_variance);
    } catch (const ReplicateError&) {
      throw;
    } catch (const std::exception& e) {
      throw ReplicateError(b, e.what());
    }
  });
  return out;
}

Design parse_design(const std::string& s) {
  if (s == "SI" || s == "si") return Design::si;
  if (s == "MI" || s == "mi") return Design::mi;
  if (s == "coupled") return Design::coupled;
  throw std::invalid_argument("design: expected SI, MI or coupled, got '" + s +
                              "'");
}

PlugIn parse_plug_in(const std::string& s) {
  if (s == "design") return PlugIn::design;
  if (s == "si" || s == "SI") return PlugIn::si;
  throw std::invalid_argument("variance_pi: expected design or si, got '" + s +
                              "'");
}

RatioForm parse_ratio_form(const std::string& s) {
  if (s == "ht") return RatioForm::ht;
  if (s == "sample_sums") return RatioForm::sample_sums;
  throw std::invalid_argument(
      "ratio_estimator: expected ht or sample_sums, got '" + s + "'");
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Round half away from zero to one decimal; never prints "-0.0".
std::string one_decimal(double v) {
  double r = std::round(v * 10.0) / 10.0;
  if (r == 0.0) r = 0.0;
  return fmt("%.1f", r);
}

constexpr const char* kTableHeader =
    "n,rb_total,rb_var_total,rrmse_var_total,cov_total,rb_ratio,rb_var_ratio,"
    "rrmse_var_ratio,cov_ratio";

}  // namespace

std::string to_string(Design d) {
  switch (d) {
    case Design::si: return "SI";
    case Design::mi: return "MI";
    case Design::coupled: return "coupled";
  }
  return "?";
}

std::string to_string(PlugIn p) {
  return p == PlugIn::design ? "design" : "si";
}

std::string to_string(RatioForm r) {
  return r == RatioForm::ht ? "ht" : "sample_sums";
}

std::vector<std::string> SimConfig::validate(
    std::optional<std::size_t> N) const {
  if (population_spec && population_file) {
    throw std::invalid_argument(
        "population: give population_spec or population_file, not both");
  }
  if (!population_spec && !population_file) {
    throw std::invalid_argument(
        "population: one of population_spec or population_file is required");
  }
  if (population_spec) population_spec->validate();
  if (replicates < 2) throw std::invalid_argument("B: must be at least 2");
  if (mse_runs < replicates) {
    throw std::invalid_argument("mse_runs: must be at least B");
  }
  if (sample_sizes.empty()) {
    throw std::invalid_argument("sample_sizes: must not be empty");
  }
  for (std::size_t n : sample_sizes) {
    if (n < 2) throw std::invalid_argument("sample_sizes: every n must be >= 2");
    if (N && n > *N) {
      throw std::invalid_argument("sample_sizes: n=" + std::to_string(n) +
                                  " exceeds N=" + std::to_string(*N));
    }
  }
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw std::invalid_argument("alpha: must lie in (0, 0.5)");
  }
  if (workers < 1) throw std::invalid_argument("worker_count: must be >= 1");
  std::vector<std::string> warnings;
  if (mse_runs < 10 * replicates) {
    warnings.push_back("mse_runs is below 10 * B; the MSE baseline adds "
                       "noticeable Monte Carlo error");
  }
  return warnings;
}

SimConfig sim_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");
  SimConfig c;
  auto field = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument(std::string(name) + ": wrong type");
    }
  };
  for (const char* name : {"B", "mse_runs", "master_seed", "worker_count"}) {
    if (j.contains(name) && !j.at(name).is_number_unsigned()) {
      throw std::invalid_argument(std::string(name) +
                                  ": must be a non-negative integer");
    }
  }
  if (j.contains("population_spec")) {
    c.population_spec = population_spec_from_json(j.at("population_spec").dump());
  }
  if (j.contains("population_file")) {
    std::string path;
    field("population_file", path);
    c.population_file = path;
  }
  if (j.contains("design")) {
    std::string d;
    field("design", d);
    c.design = parse_design(d);
  }
  if (j.contains("variance_pi")) {
    std::string v;
    field("variance_pi", v);
    c.variance_pi = parse_plug_in(v);
  }
  if (j.contains("ratio_estimator")) {
    std::string v;
    field("ratio_estimator", v);
    c.ratio_estimator = parse_ratio_form(v);
  }
  if (j.contains("sample_sizes")) {
    const auto& arr = j.at("sample_sizes");
    if (!arr.is_array()) {
      throw std::invalid_argument("sample_sizes: expected an array");
    }
    c.sample_sizes.clear();
    for (const auto& e : arr) {
      if (!e.is_number_unsigned()) {
        throw std::invalid_argument("sample_sizes: entries must be integers");
      }
      c.sample_sizes.push_back(e.get<std::size_t>());
    }
  }
  field("B", c.replicates);
  field("mse_runs", c.mse_runs);
  field("alpha", c.alpha);
  field("master_seed", c.master_seed);
  field("worker_count", c.workers);
  c.validate();
  return c;
}

std::string sim_config_to_json(const SimConfig& c) {
  nlohmann::json j;
  if (c.population_spec) {
    j["population_spec"] = nlohmann::json::parse(
        population_spec_to_json(*c.population_spec));
  }
  if (c.population_file) j["population_file"] = c.population_file->string();
  j["design"] = to_string(c.design);
  j["sample_sizes"] = c.sample_sizes;
  j["B"] = c.replicates;
  j["mse_runs"] = c.mse_runs;
  j["alpha"] = c.alpha;
  j["master_seed"] = c.master_seed;
  j["worker_count"] = c.workers;
  j["variance_pi"] = to_string(c.variance_pi);
  j["ratio_estimator"] = to_string(c.ratio_estimator);
  return j.dump(2);
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  SimConfig c = sim_config_from_json(ss.str());
  // Population files are resolved relative to the config file.
  if (c.population_file && c.population_file->is_relative()) {
    c.population_file = path.parent_path() / *c.population_file;
  }
  return c;
}

Population load_population(const SimConfig& config) {
  if (config.population_file) return load_population_csv(*config.population_file);
  if (config.population_spec) return generate_population(*config.population_spec);
  throw std::invalid_argument("population: config names no population");
}

std::vector<ReplicateRecord> run_replications(const Population& pop,
                                              const SimConfig& config,
                                              std::size_t n) {
  if (n < 2 || n > pop.size()) {
    throw std::invalid_argument("run_replications: need 2 <= n <= N");
  }
  const ReplicateSetup setup(pop, config, n);
  return run_stream(setup, config.replicates, config.master_seed, true,
                    config.workers);
}

MseEstimate approximate_mse(const Population& pop, const SimConfig& config,
                            std::size_t n) {
  if (n < 1 || n > pop.size()) {
    throw std::invalid_argument("approximate_mse: need 1 <= n <= N");
  }
  const ReplicateSetup setup(pop, config, n);
  const auto runs = run_stream(setup, config.mse_runs,
                               config.master_seed ^ kMseStreamTag, false,
                               config.workers);
  MseEstimate out;
  for (const auto& r : runs) {
    out.mse_total += (r.total - setup.total_y) * (r.total - setup.total_y);
    out.mse_ratio += (r.ratio - setup.ratio) * (r.ratio - setup.ratio);
  }
  out.mse_total /= static_cast<double>(runs.size());
  out.mse_ratio /= static_cast<double>(runs.size());
  return out;
}

double relative_bias(std::span<const double> estimates, double theta) {
  if (estimates.empty()) throw std::invalid_argument("relative_bias: no estimates");
  if (theta == 0.0) throw std::invalid_argument("relative_bias: theta is zero");
  return 100.0 * (mean_of(estimates) - theta) / theta;
}

double variance_rb(std::span<const double> variance_estimates, double mse) {
  if (variance_estimates.empty()) {
    throw std::invalid_argument("variance_rb: no estimates");
  }
  if (!(mse > 0.0)) throw std::invalid_argument("variance_rb: mse must be > 0");
  return 100.0 * (mean_of(variance_estimates) - mse) / mse;
}

double variance_rrmse(std::span<const double> variance_estimates, double mse) {
  if (variance_estimates.empty()) {
    throw std::invalid_argument("variance_rrmse: no estimates");
  }
  if (!(mse > 0.0)) throw std::invalid_argument("variance_rrmse: mse must be > 0");
  double ss = 0.0;
  for (double v : variance_estimates) ss += (v - mse) * (v - mse);
  return 100.0 * std::sqrt(ss / static_cast<double>(variance_estimates.size())) /
         mse;
}

double coverage_rate(std::span<const ReplicateRecord> records, Target which) {
  if (records.empty()) throw std::invalid_argument("coverage_rate: no records");
  std::size_t hits = 0;
  for (const auto& r : records) {
    hits += which == Target::total ? r.covers_total : r.covers_ratio;
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(records.size());
}

double ks_statistic_normal(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ks: no values");
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = normal_cdf(values[i]);
    d = std::max({d, static_cast<double>(i + 1) / m - f,
                  f - static_cast<double>(i) / m});
  }
  return d;
}

double chi_square(std::span<const std::uint64_t> counts,
                  std::span<const double> probabilities) {
  if (counts.size() != probabilities.size()) {
    throw std::invalid_argument("chi_square: size mismatch");
  }
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = total * probabilities[i];
    if (expected <= 0.0) {
      if (counts[i] != 0) return HUGE_VAL;
      continue;
    }
    const double d = static_cast<double>(counts[i]) - expected;
    stat += d * d / expected;
  }
  return stat;
}

SimResult summarize(const Population& pop, std::size_t n,
                    std::span<const ReplicateRecord> records,
                    const MseEstimate& mse) {
  const auto params = population_parameters(pop);
  std::vector<double> totals, ratios, var_totals, var_ratios;
  for (const auto& r : records) {
    totals.push_back(r.total);
    ratios.push_back(r.ratio);
    var_totals.push_back(r.var_total);
    var_ratios.push_back(r.var_ratio);
  }
  SimResult s;
  s.n = n;
  s.rb_total = relative_bias(totals, params.total_y);
  s.rb_var_total = variance_rb(var_totals, mse.mse_total);
  s.rrmse_var_total = variance_rrmse(var_totals, mse.mse_total);
  s.cov_total = coverage_rate(records, Target::total);
  s.rb_ratio = relative_bias(ratios, params.ratio);
  s.rb_var_ratio = variance_rb(var_ratios, mse.mse_ratio);
  s.rrmse_var_ratio = variance_rrmse(var_ratios, mse.mse_ratio);
  s.cov_ratio = coverage_rate(records, Target::ratio);
  s.mse_total = mse.mse_total;
  s.mse_ratio = mse.mse_ratio;
  s.var_total_analytic = var_ht_si_true(pop, n);
  s.var_ratio_analytic = var_lin_ratio_true(pop, n);
  return s;
}

std::vector<SimResult> reproduce_table(const Population& pop,
                                       const SimConfig& config,
                                       const ProgressFn& progress) {
  config.validate(pop.size());
  std::vector<SimResult> rows;
  for (std::size_t n : config.sample_sizes) {
    const auto start = std::chrono::steady_clock::now();
    const auto records = run_replications(pop, config, n);
    const auto mse = approximate_mse(pop, config, n);
    rows.push_back(summarize(pop, n, records, mse));
    if (progress) {
      const std::chrono::duration<double> dt =
          std::chrono::steady_clock::now() - start;
      progress(rows.back(), dt.count());
    }
  }
  return rows;
}

std::string table_csv_rounded(std::span<const SimResult> rows) {
  std::string out = std::string(kTableHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n);
    for (double v : {r.rb_total, r.rb_var_total, r.rrmse_var_total, r.cov_total,
                     r.rb_ratio, r.rb_var_ratio, r.rrmse_var_ratio, r.cov_ratio}) {
      out += ',' + one_decimal(v);
    }
    out += '\n';
  }
  return out;
}

std::string table_csv_full(std::span<const SimResult> rows) {
  std::string out = std::string(kTableHeader) +
                    ",mse_total,mse_ratio,var_total_analytic,"
                    "var_ratio_analytic\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n);
    for (double v : {r.rb_total, r.rb_var_total, r.rrmse_var_total, r.cov_total,
                     r.rb_ratio, r.rb_var_ratio, r.rrmse_var_ratio, r.cov_ratio,
                     r.mse_total, r.mse_ratio, r.var_total_analytic,
                     r.var_ratio_analytic}) {
      out += ',' + fmt("%.17g", v);
    }
    out += '\n';
  }
  return out;
}

std::string replicates_csv(std::span<const ReplicateRecord> records,
                           std::size_t n, Design design, bool with_header) {
  const bool coupled = design == Design::coupled;
  std::string out;
  if (with_header) {
    out = "n,replicate,total,ratio,var_total,var_ratio,covers_total,"
          "covers_ratio";
    out += coupled ? ",si_total,si_ratio,samples_equal\n" : "\n";
  }
  for (const auto& r : records) {
    out += std::to_string(n) + ',' + std::to_string(r.index);
    for (double v : {r.total, r.ratio, r.var_total, r.var_ratio}) {
      out += ',' + fmt("%.17g", v);
    }
    out += r.covers_total ? ",1" : ",0";
    out += r.covers_ratio ? ",1" : ",0";
    if (coupled) {
      out += ',' + fmt("%.17g", r.si_total) + ',' + fmt("%.17g", r.si_ratio);
      out += r.samples_equal ? ",1" : ",0";
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  constexpr std::size_t kChunk = 64;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = count;
  std::exception_ptr error;

  auto worker = [&] {
    while (true) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= count) return;
      const std::size_t end = std::min(count, begin + kChunk);
      for (std::size_t i = begin; i < end; ++i) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
          break;
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace midzuno
