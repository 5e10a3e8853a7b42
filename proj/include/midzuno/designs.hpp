#ifndef MIDZUNO_DESIGNS_HPP
#define MIDZUNO_DESIGNS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "midzuno/random.hpp"

namespace midzuno {

using Unit = std::size_t;

/// First-draw probabilities p_k. Construction rejects non-positive or
/// non-finite weights and rescales the rest to sum to one; the cumulative
/// sums used by the inverse-CDF draw are built once here.
class DrawProbabilities {
 public:
  explicit DrawProbabilities(std::vector<double> weights);

  static DrawProbabilities uniform(std::size_t N);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](Unit k) const { return p_[k]; }
  std::span<const double> values() const noexcept { return p_; }
  std::span<const double> cumulative() const noexcept { return cumulative_; }

 private:
  std::vector<double> p_;
  std::vector<double> cumulative_;
};

/// A set of distinct unit indices drawn from a population of size N,
/// stored in increasing order.
class Sample {
 public:
  /// Throws std::invalid_argument on duplicates, out-of-range indices or an
  /// empty set. Input order does not matter.
  Sample(std::vector<Unit> members, std::size_t population_size);

  std::size_t size() const noexcept { return members_.size(); }
  std::size_t population_size() const noexcept { return population_size_; }
  std::span<const Unit> members() const noexcept { return members_; }
  bool contains(Unit k) const;

  auto begin() const noexcept { return members_.begin(); }
  auto end() const noexcept { return members_.end(); }

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::vector<Unit> members_;
  std::size_t population_size_ = 0;
};

// Renders members as `0-2-3`.
std::string sample_key(std::span<const Unit> members);

/// Output of the MI/SI coupling. s_mi = S' + {k1}, s_si = S' + {k2}.
struct CoupledDraw {
  Sample s_mi;
  Sample s_si;
  Unit k1 = 0;
  Unit k2 = 0;
};

// Simple random sampling without replacement, SI(n; U).
Sample srswor(std::size_t N, std::size_t n, RandomStream& rng);

// Inverse-CDF categorical draw using one uniform variate.
Unit weighted_single_draw(const DrawProbabilities& p, RandomStream& rng);

/// Midzuno scheme: one unit k1 drawn with probabilities p, then SI(n - 1)
/// from the remaining N - 1 units.
Sample midzuno_sample(const DrawProbabilities& p, std::size_t n,
                      RandomStream& rng);

/// pi_k = (n-1)/(N-1) + p_k (N-n)/(N-1). For N = 1 every pi is 1.
std::vector<double> midzuno_inclusion_probabilities(const DrawProbabilities& p,
                                                    std::size_t n);

/// Joint MI/SI draw on one stream:
///   1. k1 ~ p
///   2. S' ~ SI(n-1; U \ {k1}),  s_mi = S' + {k1}
///   3. k2 drawn from U \ S' with probability n/N for k1 and 1/N for each
///      other unit,  s_si = S' + {k2}
/// s_mi follows the Midzuno design and s_si follows SI(n; U).
CoupledDraw coupled_sample(const DrawProbabilities& p, std::size_t n,
                           RandomStream& rng);

// Largest number of subsets (or branches) the enumeration oracles will visit.
inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

// C(N, k) saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t N, std::uint64_t k) noexcept;

/// Exact law of a fixed-size design on a small population. Subsets are
/// addressed by their colexicographic rank, so the mass vector has exactly
/// C(N, n) slots.
class DesignDistribution {
 public:
  DesignDistribution(std::size_t N, std::size_t n);

  std::size_t population_size() const noexcept { return N_; }
  std::size_t sample_size() const noexcept { return n_; }
  std::size_t subset_count() const noexcept { return mass_.size(); }

  double probability(std::span<const Unit> members) const;
  double probability_at(std::uint64_t rank) const { return mass_.at(rank); }
  void add(std::uint64_t rank, double mass) { mass_.at(rank) += mass; }

  double total_mass() const;
  std::vector<double> inclusion_probabilities() const;

  /// (sorted members, probability) for every subset with positive mass,
  /// in colex order.
  std::vector<std::pair<std::vector<Unit>, double>> entries() const;

  /// Expectation of f(members) over the design.
  template <class F>
  double expectation(F&& f) const {
    double acc = 0.0;
    for (std::uint64_t r = 0; r < mass_.size(); ++r) {
      if (mass_[r] > 0.0) acc += mass_[r] * f(unrank(r));
    }
    return acc;
  }

  std::uint64_t rank(std::span<const Unit> members) const;
  std::vector<Unit> unrank(std::uint64_t r) const;

  /// CSV with header `sample,probability`, one row per entry.
  std::string to_csv() const;

 private:
  std::size_t N_;
  std::size_t n_;
  std::vector<double> mass_;
};

/// Uniform SI(n; U) law. Guarded by kEnumerationLimit.
DesignDistribution enumerate_srswor(std::size_t N, std::size_t n);

/// Exact Midzuno law built by walking every (k1, S') branch of the two-stage
/// scheme, not from the closed form. Throws std::length_error when
/// C(N, n) exceeds kEnumerationLimit.
DesignDistribution enumerate_midzuno(const DrawProbabilities& p, std::size_t n);

/// Exact joint law of (s_mi, s_si) from the coupling.
class CouplingDistribution {
 public:
  CouplingDistribution(std::size_t N, std::size_t n);

  void add(std::uint64_t mi_rank, std::uint64_t si_rank, double mass);
  const std::map<std::pair<std::uint64_t, std::uint64_t>, double>& joint()
      const noexcept {
    return joint_;
  }

  DesignDistribution mi_marginal() const;
  DesignDistribution si_marginal() const;
  double total_mass() const;
  // P(s_mi == s_si)
  double agreement_probability() const;

 private:
  std::size_t N_;
  std::size_t n_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> joint_;
};

/// Walks all N * C(N-1, n-1) * (N-n+1) branches of the coupling. Throws
/// std::length_error when that count exceeds kEnumerationLimit.
CouplingDistribution enumerate_coupling(const DrawProbabilities& p,
                                        std::size_t n);

void save_design_csv(const DesignDistribution& d,
                     const std::filesystem::path& path);

}  // namespace midzuno

#endif  // MIDZUNO_DESIGNS_HPP
