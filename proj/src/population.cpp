#include "midzuno/population.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "midzuno/errors.hpp"
#include "midzuno/random.hpp"

namespace midzuno {

namespace {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

// Sum of squared deviations about the arithmetic mean.
double centered_ss(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double e : v) ss += (e - m) * (e - m);
  return ss;
}

}  // namespace

Population::Population(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size()) {
    throw std::invalid_argument("population: x and y differ in length");
  }
  if (x_.size() < 2) {
    throw std::invalid_argument("population: need at least 2 units");
  }
  for (std::size_t k = 0; k < x_.size(); ++k) {
    if (!(x_[k] > 0.0) || !std::isfinite(x_[k])) {
      throw std::invalid_argument("population: x[" + std::to_string(k) +
                                  "] must be finite and > 0");
    }
    if (!std::isfinite(y_[k])) {
      throw std::invalid_argument("population: y[" + std::to_string(k) +
                                  "] is not finite");
    }
  }
}

PopulationParameters population_parameters(const Population& pop) {
  PopulationParameters out;
  for (double v : pop.y()) out.total_y += v;
  for (double v : pop.x()) out.total_x += v;
  out.ratio = out.total_y / out.total_x;
  const auto denom = static_cast<double>(pop.size() - 1);
  out.dispersion_y = centered_ss(pop.y()) / denom;
  out.dispersion_z = centered_ss(linearized_residuals(pop)) / denom;
  return out;
}

std::vector<double> linearized_residuals(const Population& pop) {
  double ty = 0.0;
  double tx = 0.0;
  for (double v : pop.y()) ty += v;
  for (double v : pop.x()) tx += v;
  const double r = ty / tx;
  std::vector<double> z(pop.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = pop.y()[k] - r * pop.x()[k];
  return z;
}

double realized_r2(const Population& pop) {
  const double mx = mean(pop.x());
  const double my = mean(pop.y());
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < pop.size(); ++k) {
    const double dx = pop.x()[k] - mx;
    const double dy = pop.y()[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return (sxy * sxy) / (sxx * syy);
}

void PopulationSpec::validate() const {
  if (N < 2) throw std::invalid_argument("N: must be at least 2");
  if (!(gamma_shape > 0.0) || !std::isfinite(gamma_shape)) {
    throw std::invalid_argument("gamma_shape: must be > 0");
  }
  if (!(gamma_scale > 0.0) || !std::isfinite(gamma_scale)) {
    throw std::invalid_argument("gamma_scale: must be > 0");
  }
  if (!(x_range.first > 0.0) || !(x_range.first < x_range.second) ||
      !std::isfinite(x_range.second)) {
    throw std::invalid_argument("x_range: need 0 < lo < hi");
  }
  if (!(target_r2 > 0.0 && target_r2 < 1.0)) {
    throw std::invalid_argument("target_r2: must lie strictly inside (0, 1)");
  }
}

std::vector<double> rescale_to_range(std::span<const double> v, double lo,
                                     double hi) {
  if (!(lo < hi)) throw std::invalid_argument("rescale_to_range: need lo < hi");
  if (v.empty()) throw std::invalid_argument("rescale_to_range: empty input");
  const auto [min_it, max_it] = std::minmax_element(v.begin(), v.end());
  const double vmin = *min_it;
  const double vmax = *max_it;
  if (!(vmax > vmin)) {
    throw std::invalid_argument("rescale_to_range: input is constant");
  }
  if (vmin == lo && vmax == hi) return {v.begin(), v.end()};
  const double width = vmax - vmin;
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    // Pin the extremes; the affine expression can miss hi by one ulp.
    if (v[k] == vmin) {
      out[k] = lo;
    } else if (v[k] == vmax) {
      out[k] = hi;
    } else {
      out[k] = std::clamp(lo + (v[k] - vmin) / width * (hi - lo), lo, hi);
    }
  }
  return out;
}

double sigma_for_r2(std::span<const double> x, double r2) {
  if (!(r2 > 0.0 && r2 < 1.0)) {
    throw std::invalid_argument("sigma_for_r2: r2 must lie strictly inside (0, 1)");
  }
  if (x.empty()) throw std::invalid_argument("sigma_for_r2: empty input");
  const double var = centered_ss(x) / static_cast<double>(x.size());
  if (!(var > 0.0)) {
    throw std::invalid_argument("sigma_for_r2: x has zero variance");
  }
  return std::sqrt(var) * std::sqrt((1.0 - r2) / r2);
}

Population generate_population(const PopulationSpec& spec) {
  spec.validate();
  RandomStream rng(spec.seed);
  std::gamma_distribution<double> gamma(spec.gamma_shape, spec.gamma_scale);
  std::vector<double> raw(spec.N);
  for (auto& v : raw) v = gamma(rng);
  const auto [min_it, max_it] = std::minmax_element(raw.begin(), raw.end());
  if (!(*max_it > *min_it)) {
    throw std::invalid_argument(
        "generate_population: all gamma draws are equal, cannot rescale");
  }
  std::vector<double> x = rescale_to_range(raw, spec.x_range.first,
                                           spec.x_range.second);
  const double sigma = sigma_for_r2(x, spec.target_r2);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y(spec.N);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] + sigma * noise(rng);
  return Population(std::move(x), std::move(y));
}

void save_population_csv(const Population& pop,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "unit,x,y\n";
  char buf[96];
  for (std::size_t k = 0; k < pop.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", k, pop.x()[k],
                  pop.y()[k]);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Population load_population_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument(path.string() + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "unit,x,y") {
    throw std::invalid_argument(path.string() +
                                ": expected header 'unit,x,y'");
  }
  std::vector<double> x;
  std::vector<double> y;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string unit_s, x_s, y_s;
    if (!std::getline(ss, unit_s, ',') || !std::getline(ss, x_s, ',') ||
        !std::getline(ss, y_s)) {
      throw std::invalid_argument(path.string() + ": malformed row " +
                                  std::to_string(row));
    }
    try {
      if (std::stoull(unit_s) != x.size()) {
        throw std::invalid_argument("unit");
      }
      x.push_back(std::stod(x_s));
      y.push_back(std::stod(y_s));
    } catch (const std::exception&) {
      throw std::invalid_argument(path.string() + ": bad value on row " +
                                  std::to_string(row) +
                                  " (units must be 0..N-1 in order)");
    }
  }
  return Population(std::move(x), std::move(y));
}

PopulationSpec population_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("population spec: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("population spec: expected a JSON object");
  }
  if (j.contains("N") && !j.at("N").is_number_unsigned()) {
    throw std::invalid_argument("N: must be a positive integer");
  }
  PopulationSpec spec;
  auto field = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument(std::string(name) + ": wrong type");
    }
  };
  field("N", spec.N);
  field("gamma_shape", spec.gamma_shape);
  field("gamma_scale", spec.gamma_scale);
  field("target_r2", spec.target_r2);
  field("seed", spec.seed);
  if (j.contains("x_range")) {
    const auto& r = j.at("x_range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() ||
        !r[1].is_number()) {
      throw std::invalid_argument("x_range: expected [lo, hi]");
    }
    spec.x_range = {r[0].get<double>(), r[1].get<double>()};
  }
  spec.validate();
  return spec;
}

std::string population_spec_to_json(const PopulationSpec& spec) {
  nlohmann::json j = {{"N", spec.N},
                      {"gamma_shape", spec.gamma_shape},
                      {"gamma_scale", spec.gamma_scale},
                      {"x_range", {spec.x_range.first, spec.x_range.second}},
                      {"target_r2", spec.target_r2},
                      {"seed", spec.seed}};
  return j.dump(2);
}

PopulationSpec load_population_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return population_spec_from_json(ss.str());
}

}  // namespace midzuno
