#include "midzuno/designs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "midzuno/errors.hpp"

namespace midzuno {

namespace {

void check_size(std::size_t N, std::size_t n, const char* who) {
  if (n < 1 || n > N) {
    throw std::invalid_argument(std::string(who) + ": need 1 <= n <= N (n=" +
                                std::to_string(n) + ", N=" +
                                std::to_string(N) + ")");
  }
}

// Floyd's algorithm: a uniformly distributed m-subset of {0, ..., universe-1},
// returned sorted. Uses m draws.
std::vector<Unit> floyd_subset(std::size_t universe, std::size_t m,
                               RandomStream& rng) {
  std::vector<Unit> chosen;
  chosen.reserve(m + 1);
  if (m == 0) return chosen;
  if (universe <= 32 * m) {
    std::vector<char> taken(universe, 0);
    for (std::size_t j = universe - m; j < universe; ++j) {
      const auto t = static_cast<Unit>(rng.uniform_below(j + 1));
      const Unit pick = taken[t] ? j : t;
      taken[pick] = 1;
      chosen.push_back(pick);
    }
    std::sort(chosen.begin(), chosen.end());
  } else {
    for (std::size_t j = universe - m; j < universe; ++j) {
      const auto t = static_cast<Unit>(rng.uniform_below(j + 1));
      auto it = std::lower_bound(chosen.begin(), chosen.end(), t);
      if (it != chosen.end() && *it == t) {
        // j exceeds every element chosen so far.
        chosen.push_back(j);
      } else {
        chosen.insert(it, t);
      }
    }
  }
  return chosen;
}

std::vector<Unit> with_unit(std::vector<Unit> sorted, Unit k) {
  sorted.insert(std::lower_bound(sorted.begin(), sorted.end(), k), k);
  return sorted;
}

// The r-th (0-based) unit of {0..N-1} not present in `sorted`.
Unit nth_outside(std::span<const Unit> sorted, std::size_t r) {
  Unit candidate = r;
  for (Unit m : sorted) {
    if (m <= candidate) {
      ++candidate;
    } else {
      break;
    }
  }
  return candidate;
}

// Calls f(span) on every m-subset of {0..universe-1} in lexicographic order.
template <class F>
void for_each_subset(std::size_t universe, std::size_t m, F&& f) {
  std::vector<Unit> c(m);
  for (std::size_t i = 0; i < m; ++i) c[i] = i;
  while (true) {
    f(std::span<const Unit>(c));
    std::size_t i = m;
    while (i > 0 && c[i - 1] == universe - m + (i - 1)) --i;
    if (i == 0) return;
    ++c[i - 1];
    for (std::size_t j = i; j < m; ++j) c[j] = c[j - 1] + 1;
  }
}

std::vector<Unit> all_units(std::size_t N) {
  std::vector<Unit> u(N);
  for (std::size_t k = 0; k < N; ++k) u[k] = k;
  return u;
}

}  // namespace

DrawProbabilities::DrawProbabilities(std::vector<double> weights)
    : p_(std::move(weights)) {
  if (p_.empty()) throw std::invalid_argument("draw probabilities: empty");
  double total = 0.0;
  for (std::size_t k = 0; k < p_.size(); ++k) {
    if (!(p_[k] > 0.0) || !std::isfinite(p_[k])) {
      throw std::invalid_argument("draw probabilities: p[" + std::to_string(k) +
                                  "] must be finite and > 0");
    }
    total += p_[k];
  }
  for (auto& v : p_) v /= total;
  cumulative_.resize(p_.size());
  double run = 0.0;
  for (std::size_t k = 0; k < p_.size(); ++k) {
    run += p_[k];
    cumulative_[k] = run;
  }
  cumulative_.back() = 1.0;
}

DrawProbabilities DrawProbabilities::uniform(std::size_t N) {
  return DrawProbabilities(std::vector<double>(N, 1.0));
}

Sample::Sample(std::vector<Unit> members, std::size_t population_size)
    : members_(std::move(members)), population_size_(population_size) {
  if (members_.empty()) throw std::invalid_argument("sample: empty");
  std::sort(members_.begin(), members_.end());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
    throw std::invalid_argument("sample: duplicate unit");
  }
  if (members_.back() >= population_size_) {
    throw std::invalid_argument("sample: unit index out of range");
  }
}

bool Sample::contains(Unit k) const {
  return std::binary_search(members_.begin(), members_.end(), k);
}

std::string sample_key(std::span<const Unit> members) {
  std::string out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(members[i]);
  }
  return out;
}

Sample srswor(std::size_t N, std::size_t n, RandomStream& rng) {
  check_size(N, n, "srswor");
  if (n == N) return Sample(all_units(N), N);
  return Sample(floyd_subset(N, n, rng), N);
}

Unit weighted_single_draw(const DrawProbabilities& p, RandomStream& rng) {
  if (p.size() == 1) return 0;
  const auto cum = p.cumulative();
  const double u = rng.uniform01();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return static_cast<Unit>(std::min<std::ptrdiff_t>(
      it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
}

namespace {

struct MidzunoParts {
  Unit k1;
  std::vector<Unit> rest;  // S', sorted
};

MidzunoParts midzuno_parts(const DrawProbabilities& p, std::size_t n,
                           RandomStream& rng) {
  const std::size_t N = p.size();
  const Unit k1 = weighted_single_draw(p, rng);
  std::vector<Unit> rest = floyd_subset(N - 1, n - 1, rng);
  for (auto& u : rest) {
    if (u >= k1) ++u;
  }
  return {k1, std::move(rest)};
}

}  // namespace

Sample midzuno_sample(const DrawProbabilities& p, std::size_t n,
                      RandomStream& rng) {
  const std::size_t N = p.size();
  check_size(N, n, "midzuno_sample");
  if (n == N) return Sample(all_units(N), N);
  auto parts = midzuno_parts(p, n, rng);
  return Sample(with_unit(std::move(parts.rest), parts.k1), N);
}

std::vector<double> midzuno_inclusion_probabilities(const DrawProbabilities& p,
                                                    std::size_t n) {
  const std::size_t N = p.size();
  check_size(N, n, "midzuno_inclusion_probabilities");
  if (n == N) return std::vector<double>(N, 1.0);
  const double base = static_cast<double>(n - 1) / static_cast<double>(N - 1);
  const double slope = static_cast<double>(N - n) / static_cast<double>(N - 1);
  std::vector<double> pi(N);
  for (std::size_t k = 0; k < N; ++k) pi[k] = base + p[k] * slope;
  return pi;
}

CoupledDraw coupled_sample(const DrawProbabilities& p, std::size_t n,
                           RandomStream& rng) {
  const std::size_t N = p.size();
  check_size(N, n, "coupled_sample");
  if (n == N) {
    // Census: steps 1 and 3 still pick k1 = k2, the samples are U.
    const Unit k1 = weighted_single_draw(p, rng);
    return {Sample(all_units(N), N), Sample(all_units(N), N), k1, k1};
  }
  auto parts = midzuno_parts(p, n, rng);
  std::vector<Unit> s_mi = with_unit(parts.rest, parts.k1);

  // Step 3 as one integer draw on [0, N): the first n values select k1
  // (probability n/N), each remaining value selects one of the N - n units
  // outside s_mi (probability 1/N each). The branches cover N values exactly.
  const std::size_t outside = N - s_mi.size();
  if (n + outside != N) throw std::logic_error("coupled_sample: step-3 mass");
  const auto r = static_cast<std::size_t>(rng.uniform_below(N));
  const Unit k2 = r < n ? parts.k1 : nth_outside(s_mi, r - n);

  std::vector<Unit> s_si = with_unit(std::move(parts.rest), k2);
  return {Sample(std::move(s_mi), N), Sample(std::move(s_si), N), parts.k1, k2};
}

std::uint64_t binomial(std::uint64_t N, std::uint64_t k) noexcept {
  if (k > N) return 0;
  k = std::min(k, N - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (N - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(acc);
}

DesignDistribution::DesignDistribution(std::size_t N, std::size_t n)
    : N_(N), n_(n) {
  check_size(N, n, "design distribution");
  const std::uint64_t count = binomial(N, n);
  if (count > kEnumerationLimit) {
    throw std::length_error("enumeration: C(" + std::to_string(N) + ", " +
                            std::to_string(n) + ") = " + std::to_string(count) +
                            " exceeds the limit of " +
                            std::to_string(kEnumerationLimit) + " subsets");
  }
  mass_.assign(count, 0.0);
}

std::uint64_t DesignDistribution::rank(std::span<const Unit> members) const {
  if (members.size() != n_) {
    throw std::invalid_argument("design distribution: wrong subset size");
  }
  std::uint64_t r = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i] >= N_ || (i > 0 && members[i] <= members[i - 1])) {
      throw std::invalid_argument(
          "design distribution: members must be sorted, distinct, < N");
    }
    r += binomial(members[i], i + 1);
  }
  return r;
}

std::vector<Unit> DesignDistribution::unrank(std::uint64_t r) const {
  std::vector<Unit> out(n_);
  Unit c = N_;
  for (std::size_t i = n_; i > 0; --i) {
    do {
      --c;
    } while (binomial(c, i) > r);
    out[i - 1] = c;
    r -= binomial(c, i);
  }
  return out;
}

double DesignDistribution::probability(std::span<const Unit> members) const {
  return mass_.at(rank(members));
}

double DesignDistribution::total_mass() const {
  double s = 0.0;
  for (double m : mass_) s += m;
  return s;
}

std::vector<double> DesignDistribution::inclusion_probabilities() const {
  std::vector<double> pi(N_, 0.0);
  for (std::uint64_t r = 0; r < mass_.size(); ++r) {
    if (mass_[r] == 0.0) continue;
    for (Unit k : unrank(r)) pi[k] += mass_[r];
  }
  return pi;
}

std::vector<std::pair<std::vector<Unit>, double>> DesignDistribution::entries()
    const {
  std::vector<std::pair<std::vector<Unit>, double>> out;
  for (std::uint64_t r = 0; r < mass_.size(); ++r) {
    if (mass_[r] > 0.0) out.emplace_back(unrank(r), mass_[r]);
  }
  return out;
}

std::string DesignDistribution::to_csv() const {
  std::string out = "sample,probability\n";
  char buf[40];
  for (const auto& [members, prob] : entries()) {
    std::snprintf(buf, sizeof buf, ",%.17g\n", prob);
    out += sample_key(members);
    out += buf;
  }
  return out;
}

DesignDistribution enumerate_srswor(std::size_t N, std::size_t n) {
  DesignDistribution d(N, n);
  const double each = 1.0 / static_cast<double>(d.subset_count());
  for (std::uint64_t r = 0; r < d.subset_count(); ++r) d.add(r, each);
  return d;
}

DesignDistribution enumerate_midzuno(const DrawProbabilities& p,
                                     std::size_t n) {
  const std::size_t N = p.size();
  DesignDistribution d(N, n);
  const double second_stage =
      1.0 / static_cast<double>(binomial(N - 1, n - 1));
  std::vector<Unit> members(n);
  for (Unit k1 = 0; k1 < N; ++k1) {
    const double branch = p[k1] * second_stage;
    for_each_subset(N - 1, n - 1, [&](std::span<const Unit> rest) {
      std::size_t j = 0;
      bool placed = false;
      for (Unit u : rest) {
        const Unit unit = u >= k1 ? u + 1 : u;
        if (!placed && k1 < unit) {
          members[j++] = k1;
          placed = true;
        }
        members[j++] = unit;
      }
      if (!placed) members[j] = k1;
      d.add(d.rank(members), branch);
    });
  }
  return d;
}

CouplingDistribution::CouplingDistribution(std::size_t N, std::size_t n)
    : N_(N), n_(n) {
  check_size(N, n, "coupling distribution");
}

void CouplingDistribution::add(std::uint64_t mi_rank, std::uint64_t si_rank,
                               double mass) {
  joint_[{mi_rank, si_rank}] += mass;
}

DesignDistribution CouplingDistribution::mi_marginal() const {
  DesignDistribution d(N_, n_);
  for (const auto& [key, mass] : joint_) d.add(key.first, mass);
  return d;
}

DesignDistribution CouplingDistribution::si_marginal() const {
  DesignDistribution d(N_, n_);
  for (const auto& [key, mass] : joint_) d.add(key.second, mass);
  return d;
}

double CouplingDistribution::total_mass() const {
  double s = 0.0;
  for (const auto& [key, mass] : joint_) s += mass;
  return s;
}

double CouplingDistribution::agreement_probability() const {
  double s = 0.0;
  for (const auto& [key, mass] : joint_) {
    if (key.first == key.second) s += mass;
  }
  return s;
}

CouplingDistribution enumerate_coupling(const DrawProbabilities& p,
                                        std::size_t n) {
  const std::size_t N = p.size();
  check_size(N, n, "enumerate_coupling");
  const std::uint64_t inner = binomial(N - 1, n - 1);
  const unsigned __int128 branches =
      static_cast<unsigned __int128>(N) * inner * (N - n + 1);
  if (branches > kEnumerationLimit) {
    throw std::length_error(
        "enumerate_coupling: N * C(N-1, n-1) * (N-n+1) exceeds the limit of " +
        std::to_string(kEnumerationLimit) + " branches");
  }
  CouplingDistribution joint(N, n);
  const DesignDistribution index(N, n);  // ranking only
  const double second_stage = 1.0 / static_cast<double>(inner);
  const double keep_k1 = static_cast<double>(n) / static_cast<double>(N);
  const double swap = 1.0 / static_cast<double>(N);
  for (Unit k1 = 0; k1 < N; ++k1) {
    const double branch = p[k1] * second_stage;
    for_each_subset(N - 1, n - 1, [&](std::span<const Unit> raw) {
      std::vector<Unit> rest(raw.begin(), raw.end());
      for (auto& u : rest) {
        if (u >= k1) ++u;
      }
      const std::vector<Unit> s_mi = with_unit(rest, k1);
      const std::uint64_t mi_rank = index.rank(s_mi);
      for (Unit k2 = 0; k2 < N; ++k2) {
        if (std::binary_search(rest.begin(), rest.end(), k2)) continue;
        const double w = k2 == k1 ? keep_k1 : swap;
        joint.add(mi_rank, index.rank(with_unit(rest, k2)), branch * w);
      }
    });
  }
  return joint;
}

void save_design_csv(const DesignDistribution& d,
                     const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path.string());
  const std::string text = d.to_csv();
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  std::fclose(f);
  if (!ok) throw IoError("write failed for " + path.string());
}

}  // namespace midzuno
