#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otc/dynamics.hpp"
#include "otc/model.hpp"

namespace otc {

/// Finite population of N investors, held as occupancy counts per state in
/// `state_layout` order.
struct Population {
  ModelKind kind = ModelKind::NonSegmented;
  int K = 0;
  long long N = 0;
  std::vector<long long> counts;
  std::uint64_t rng_seed = 0;
  double time = 0.0;
};

/// round(N * mu(z)) per state with owner totals pinned to round(N * m_i) and
/// the (l,n) pool absorbing the remainder so the counts sum to N.
Population population_from(const MarketParams& params, long long N, const StateDistribution& dist);

struct McTrajectory {
  std::vector<double> times;
  /// Empirical measure counts / N at each sample time, `state_layout` order.
  std::vector<std::vector<double>> fractions;
  long long events = 0;
  /// Events fired per channel, labelled in `channel_labels`.
  std::vector<long long> channel_events;
  std::vector<std::string> channel_labels;
  /// Integral over [0, t_end] of each state's count.
  std::vector<double> occupation_time;
  Population final_state;
};

/// Exact-event (Gillespie direct method) simulation of the count chain.
/// Trade channels fire at lambda_i * count(buyer) * count(li,o) / N; type
/// switches fire at rate times count. Throws InconsistentInitialCounts when
/// counts are negative, do not sum to N, or owner totals differ from
/// round(N * m_i).
McTrajectory simulate(const MarketParams& params, const Population& initial, double t_end, std::uint64_t seed,
                      const std::vector<double>& sample_times);

/// Independent runs, one per seed, spread over hardware threads. Output
/// order follows `seeds`.
std::vector<McTrajectory> simulate_seeds(const MarketParams& params, const Population& initial, double t_end,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::vector<double>& sample_times);

struct LlnError {
  std::vector<double> gaps;  // sup-norm per sample time
  double max_gap = 0.0;
};

/// Sup-norm distance between the empirical measure and the ODE solution at
/// each shared sample time. Throws TimeGridMismatch when the grids differ.
LlnError lln_error(const McTrajectory& mc, const Trajectory& ode);

}  // namespace otc
