/*
 * SPDX-FileCopyrightText: Copyright 2026 The power-attest Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Binomial parameterization of multi-trace attestation: the pass threshold
// x_th out of n traces, the cheat / honest pass probabilities, and the search
// for the smallest n reaching a target security level.

#include "power_attest/error.hpp"
#include "power_attest/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace power_attest {

namespace detail {

inline void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    fail(Errc::domain_error, "probability must lie in [0, 1], got " + std::to_string(p));
}

inline void check_binomial(std::uint64_t n, std::uint64_t k, double p) {
  check_probability(p);
  if (k > n)
    fail(Errc::domain_error, "k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
}

inline double log_pmf(std::uint64_t n, std::uint64_t x, double p) {
  const double dn = static_cast<double>(n), dx = static_cast<double>(x);
  return std::lgamma(dn + 1.0) - std::lgamma(dx + 1.0) - std::lgamma(dn - dx + 1.0) + dx * std::log(p) +
         (dn - dx) * std::log1p(-p);
}

// log sum_{x >= k} P(x) for k at or above the mode (terms non-increasing), 0 < p < 1.
inline double log_upper_sum(std::uint64_t n, std::uint64_t k, double p) {
  const double odds = p / (1.0 - p);
  double term = 1.0, sum = 1.0;
  for (std::uint64_t x = k; x < n; ++x) {
    term *= static_cast<double>(n - x) / static_cast<double>(x + 1) * odds;
    sum += term;
    if (term < sum * 1e-18)
      break;
  }
  return log_pmf(n, k, p) + std::log(sum);
}

// log sum_{x < k} P(x) for k - 1 at or below the mode (terms non-increasing going down), 0 < p < 1.
inline double log_lower_sum(std::uint64_t n, std::uint64_t k, double p) {
  const double inv_odds = (1.0 - p) / p;
  double term = 1.0, sum = 1.0;
  for (std::uint64_t x = k - 1; x > 0; --x) {
    term *= static_cast<double>(x) / static_cast<double>(n - x + 1) * inv_odds;
    sum += term;
    if (term < sum * 1e-18)
      break;
  }
  return log_pmf(n, k - 1, p) + std::log(sum);
}

} // namespace detail

/// P(X = x) for X ~ Binomial(n, p).
inline double binom_pmf(std::uint64_t n, std::uint64_t x, double p) {
  detail::check_binomial(n, x, p);
  if (p == 0.0)
    return x == 0 ? 1.0 : 0.0;
  if (p == 1.0)
    return x == n ? 1.0 : 0.0;
  return std::exp(detail::log_pmf(n, x, p));
}

/// Upper tail and its complement, each evaluated on the side where it is
/// small so neither loses relative precision.
struct BinomialTail {
  double tail;       // P(X >= k)
  double complement; // P(X < k)
};

inline BinomialTail binom_tail_pair(std::uint64_t n, std::uint64_t k, double p) {
  detail::check_binomial(n, k, p);
  if (k == 0)
    return {1.0, 0.0};
  if (p == 0.0)
    return {0.0, 1.0};
  if (p == 1.0)
    return {1.0, 0.0};
  if (static_cast<double>(k) > static_cast<double>(n) * p) {
    const double t = std::exp(detail::log_upper_sum(n, k, p));
    return {t, 1.0 - t};
  }
  const double c = std::exp(detail::log_lower_sum(n, k, p));
  return {1.0 - c, c};
}

/// P(X >= k) for X ~ Binomial(n, p), summed in log space.
inline double binom_tail(std::uint64_t n, std::uint64_t k, double p) { return binom_tail_pair(n, k, p).tail; }

/// log2 P(X >= k); finite for tails far below the double range.
inline double log2_binom_tail(std::uint64_t n, std::uint64_t k, double p) {
  detail::check_binomial(n, k, p);
  if (k == 0 || p == 1.0)
    return 0.0;
  if (p == 0.0)
    return -INFINITY;
  if (static_cast<double>(k) > static_cast<double>(n) * p)
    return detail::log_upper_sum(n, k, p) / std::log(2.0);
  return std::log1p(-std::exp(detail::log_lower_sum(n, k, p))) / std::log(2.0);
}

struct SecurityParams {
  double p_alpha = 0.0;
  double p_beta = 1.0;
  std::uint64_t n = 1;
  std::uint64_t x_th = 1;
  double p_cheat = 0.0;         // P(alpha) = P(x >= x_th | p_alpha)
  double p_honest = 1.0;        // P(beta)  = P(x >= x_th | p_beta)
  double honest_failure = 0.0;  // 1 - P(beta), evaluated directly
};

inline void check_separable(double p_alpha, double p_beta) {
  if (!(p_alpha >= 0.0 && p_alpha < p_beta && p_beta <= 1.0))
    fail(Errc::invalid_probabilities, "need 0 <= p_alpha < p_beta <= 1");
}

/// x_th = ceil(n * (w*p_alpha + (1-w)*p_beta)); w = 0.5 is the midpoint.
/// Requires p_alpha < x_th/n < p_beta; the upper bound admits x_th = n when
/// p_beta = 1, since an honest prover then always passes.
inline std::uint64_t threshold_traces(std::uint64_t n, double p_alpha, double p_beta, double weight = 0.5) {
  check_separable(p_alpha, p_beta);
  if (n == 0)
    fail(Errc::invalid_argument, "n must be positive");
  if (!(weight >= 0.0 && weight <= 1.0))
    fail(Errc::invalid_argument, "threshold weight must be in [0, 1]");
  const double target = static_cast<double>(n) * (weight * p_alpha + (1.0 - weight) * p_beta);
  // Absorb representation error so exact products such as 10 * 0.5 are not bumped up.
  auto x = static_cast<std::uint64_t>(std::ceil(target - 1e-9 * std::max(1.0, target)));
  const double ratio = static_cast<double>(x) / static_cast<double>(n);
  const bool upper_ok = ratio < p_beta || (p_beta == 1.0 && x == n);
  if (!(p_alpha < ratio && upper_ok))
    fail(Errc::threshold_out_of_band, "x_th = " + std::to_string(x) + " of n = " + std::to_string(n) +
                                          " is outside (p_alpha, p_beta)");
  return x;
}

struct HonestPass {
  double probability; // P(beta)
  double complement;  // 1 - P(beta)
};

inline HonestPass honest_pass_prob(std::uint64_t n, std::uint64_t x_th, double p_beta) {
  const auto t = binom_tail_pair(n, x_th, p_beta);
  return {t.tail, t.complement};
}

inline SecurityParams evaluate_params(std::uint64_t n, std::uint64_t x_th, double p_alpha, double p_beta) {
  SecurityParams s;
  s.p_alpha = p_alpha;
  s.p_beta = p_beta;
  s.n = n;
  s.x_th = x_th;
  s.p_cheat = binom_tail(n, x_th, p_alpha);
  const auto h = honest_pass_prob(n, x_th, p_beta);
  s.p_honest = h.probability;
  s.honest_failure = h.complement;
  return s;
}

inline constexpr std::uint64_t kDefaultTraceCap = 1'000'000;

/// Smallest n (linear scan from 1, skipping out-of-band n) whose threshold
/// gives P(alpha) <= 2^-level_bits.
inline SecurityParams min_traces_for_level(double p_alpha, double p_beta, unsigned level_bits,
                                           double weight = 0.5, std::uint64_t cap = kDefaultTraceCap) {
  check_separable(p_alpha, p_beta);
  if (level_bits < 1)
    fail(Errc::invalid_argument, "level_bits must be at least 1");
  for (std::uint64_t n = 1; n <= cap; ++n) {
    std::uint64_t x;
    try {
      x = threshold_traces(n, p_alpha, p_beta, weight);
    } catch (const Error& e) {
      if (e.code() == Errc::threshold_out_of_band)
        continue;
      throw;
    }
    if (log2_binom_tail(n, x, p_alpha) <= -static_cast<double>(level_bits))
      return evaluate_params(n, x, p_alpha, p_beta);
  }
  fail(Errc::no_solution_below_cap, "no n <= " + std::to_string(cap) + " reaches " +
                                        std::to_string(level_bits) + "-bit security");
}

// ---------------------------------------------------------------------------
// Monte-Carlo witness

struct Interval {
  double lo;
  double hi;

  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

/// Wilson score interval for `successes` out of `trials` at two-sided `confidence`.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double confidence = 0.99) {
  if (trials == 0 || successes > trials)
    fail(Errc::invalid_argument, "wilson interval needs 0 <= successes <= trials, trials > 0");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + confidence / 2.0);
  const double nt = static_cast<double>(trials);
  const double ph = static_cast<double>(successes) / nt;
  const double z2 = z * z;
  const double center = (ph + z2 / (2 * nt)) / (1 + z2 / nt);
  const double half = z / (1 + z2 / nt) * std::sqrt(ph * (1 - ph) / nt + z2 / (4 * nt * nt));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct MultiAttestSimulation {
  std::uint64_t batches = 0;
  std::uint64_t cheat_passes = 0;
  std::uint64_t honest_passes = 0;
  double cheat_rate = 0.0;
  double honest_rate = 0.0;
  Interval cheat_ci{0, 0};
  Interval honest_ci{0, 0};
};

/// Draws Bernoulli batches of size n at p_alpha and p_beta and counts batches
/// with at least x_th successes.
inline MultiAttestSimulation simulate_multi_attest(const SecurityParams& params, std::uint64_t batches,
                                                   std::uint64_t seed, double confidence = 0.99) {
  if (batches < 1)
    fail(Errc::invalid_argument, "need at least one batch");
  SplitMix64 cheat_rng(derive_seed(seed, 0)), honest_rng(derive_seed(seed, 1));
  MultiAttestSimulation out;
  out.batches = batches;
  auto run = [&](SplitMix64& g, double p) {
    std::uint64_t passed = 0;
    for (std::uint64_t b = 0; b < batches; ++b) {
      std::uint64_t x = 0;
      for (std::uint64_t i = 0; i < params.n; ++i)
        x += g.uniform() < p ? 1 : 0;
      passed += x >= params.x_th ? 1 : 0;
    }
    return passed;
  };
  out.cheat_passes = run(cheat_rng, params.p_alpha);
  out.honest_passes = run(honest_rng, params.p_beta);
  out.cheat_rate = static_cast<double>(out.cheat_passes) / static_cast<double>(batches);
  out.honest_rate = static_cast<double>(out.honest_passes) / static_cast<double>(batches);
  out.cheat_ci = wilson_interval(out.cheat_passes, batches, confidence);
  out.honest_ci = wilson_interval(out.honest_passes, batches, confidence);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter table

inline constexpr double kReferencePAlpha = 0.082;
inline constexpr double kReferencePBeta = 0.69;

struct OperatingPoint {
  unsigned level_bits;
  std::uint64_t n;
};

/// Published operating points (security level, n) for p_alpha = 0.082, p_beta = 0.69.
inline constexpr OperatingPoint kReferenceOperatingPoints[] = {{32, 52}, {64, 114}, {128, 243}, {256, 494}};

struct TableRow {
  unsigned level_bits;
  SecurityParams at_reference_n; // x_th and probabilities recomputed at the published n
  SecurityParams minimal;        // smallest n found by the search
};

inline std::vector<TableRow> security_table(double p_alpha = kReferencePAlpha, double p_beta = kReferencePBeta) {
  std::vector<TableRow> rows;
  for (const auto& op : kReferenceOperatingPoints) {
    TableRow row;
    row.level_bits = op.level_bits;
    row.at_reference_n = evaluate_params(op.n, threshold_traces(op.n, p_alpha, p_beta), p_alpha, p_beta);
    row.minimal = min_traces_for_level(p_alpha, p_beta, op.level_bits);
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_security_table(const std::vector<TableRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s | %5s | %5s | %-10s | %-14s || %5s | %5s | %-10s | %-14s\n", "level",
                "n", "x_th", "P(alpha)", "1 - P(beta)", "n_min", "x_th", "P(alpha)", "1 - P(beta)");
  out += line;
  out += std::string(100, '-') + "\n";
  for (const auto& r : rows) {
    const auto& a = r.at_reference_n;
    const auto& m = r.minimal;
    std::snprintf(line, sizeof line, "%3u-bit  | %5llu | %5llu | %10.3e | %14.3e || %5llu | %5llu | %10.3e | %14.3e\n",
                  r.level_bits, static_cast<unsigned long long>(a.n), static_cast<unsigned long long>(a.x_th),
                  a.p_cheat, a.honest_failure, static_cast<unsigned long long>(m.n),
                  static_cast<unsigned long long>(m.x_th), m.p_cheat, m.honest_failure);
    out += line;
  }
  return out;
}

} // namespace power_attest
