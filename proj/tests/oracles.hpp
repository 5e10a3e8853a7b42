// Test-only reference computations. Nothing here calls into the sampling or
// enumeration code under test; designs are rebuilt from first principles.
#ifndef MIDZUNO_TESTS_ORACLES_HPP
#define MIDZUNO_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Subset = std::vector<std::size_t>;

// All m-subsets of {0..N-1} by recursion, in lexicographic order.
inline void subsets_rec(std::size_t N, std::size_t m, std::size_t start,
                        Subset& cur, std::vector<Subset>& out) {
  if (cur.size() == m) {
    out.push_back(cur);
    return;
  }
  for (std::size_t k = start; k < N; ++k) {
    cur.push_back(k);
    subsets_rec(N, m, k + 1, cur, out);
    cur.pop_back();
  }
}

inline std::vector<Subset> subsets(std::size_t N, std::size_t m) {
  std::vector<Subset> out;
  Subset cur;
  subsets_rec(N, m, 0, cur, out);
  return out;
}

inline double choose(std::size_t N, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(N - k + i) / static_cast<double>(i);
  }
  return r;
}

// Midzuno law from the closed form P(S) = sum_S p / C(N-1, n-1).
inline std::map<Subset, double> midzuno_law(const std::vector<double>& p,
                                            std::size_t n) {
  std::map<Subset, double> law;
  const double c = choose(p.size() - 1, n - 1);
  for (const auto& s : subsets(p.size(), n)) {
    double mass = 0.0;
    for (auto k : s) mass += p[k];
    law[s] = mass / c;
  }
  return law;
}

// Coupling law by brute force over (k1, S', k2), keyed by the SI sample.
inline std::map<Subset, double> coupling_si_law(const std::vector<double>& p,
                                                std::size_t n) {
  const std::size_t N = p.size();
  std::map<Subset, double> law;
  const double c = choose(N - 1, n - 1);
  for (std::size_t k1 = 0; k1 < N; ++k1) {
    for (const auto& s : subsets(N, n - 1)) {
      bool has_k1 = false;
      for (auto k : s) has_k1 |= k == k1;
      if (has_k1) continue;
      for (std::size_t k2 = 0; k2 < N; ++k2) {
        bool in_s = false;
        for (auto k : s) in_s |= k == k2;
        if (in_s) continue;
        const double w = k2 == k1 ? static_cast<double>(n) / N : 1.0 / N;
        Subset si = s;
        si.push_back(k2);
        std::sort(si.begin(), si.end());
        law[si] += p[k1] / c * w;
      }
    }
  }
  return law;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

// Sample variance with divisor (size - 1).
inline double sample_var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double e : v) s += (e - m) * (e - m);
  return s / static_cast<double>(v.size() - 1);
}

// Random positive vector for property cases.
inline std::vector<double> random_positive(std::mt19937_64& gen, std::size_t N,
                                           double lo = 0.05, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(N);
  for (auto& e : v) e = u(gen);
  return v;
}

// Binomial 4-sigma band check for an observed frequency.
inline bool within_sigmas(double observed_freq, double p, double trials,
                          double sigmas = 4.0) {
  const double sd = std::sqrt(p * (1.0 - p) / trials);
  return std::abs(observed_freq - p) <= sigmas * sd + 1e-15;
}

}  // namespace oracle

#endif  // MIDZUNO_TESTS_ORACLES_HPP
