#include "otc/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <thread>

#include "otc/error.hpp"
#include "otc/linalg.hpp"

namespace otc {

namespace {

struct Channel {
  double k = 0.0;
  int a = 0;
  int b = -1;  // second reactant for pairwise meetings
  std::vector<std::pair<int, int>> moves;
  std::string label;
};

struct Indices {
  int ln = 0;
  int hn = 1;  // non-segmented only
  int K = 0;
  ModelKind kind = ModelKind::NonSegmented;
  [[nodiscard]] int buyer(int i) const { return kind == ModelKind::NonSegmented ? 1 : 1 + i; }
  [[nodiscard]] int hio(int i) const { return kind == ModelKind::NonSegmented ? 2 + i : 1 + K + i; }
  [[nodiscard]] int lio(int i) const { return kind == ModelKind::NonSegmented ? 2 + K + i : 1 + 2 * K + i; }
};

std::vector<Channel> build_channels(const MarketParams& p) {
  const Indices ix{0, 1, p.K(), p.kind()};
  std::vector<Channel> ch;
  for (int i = 0; i < p.K(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const std::string a = std::to_string(i + 1);
    ch.push_back({p.lambda()[u], ix.buyer(i), ix.lio(i), {{ix.buyer(i), ix.hio(i)}, {ix.lio(i), ix.ln}}, "trade" + a});
    ch.push_back({p.gamma_ui()[u], ix.lio(i), -1, {{ix.lio(i), ix.hio(i)}}, "owner_up" + a});
    ch.push_back({p.gamma_di()[u], ix.hio(i), -1, {{ix.hio(i), ix.lio(i)}}, "owner_down" + a});
  }
  if (p.kind() == ModelKind::NonSegmented) {
    ch.push_back({p.gamma_u(), ix.ln, -1, {{ix.ln, ix.hn}}, "nonowner_up"});
    ch.push_back({p.gamma_d(), ix.hn, -1, {{ix.hn, ix.ln}}, "nonowner_down"});
  } else {
    for (int i = 0; i < p.K(); ++i) {
      const auto u = static_cast<std::size_t>(i);
      const std::string a = std::to_string(i + 1);
      ch.push_back({p.tgamma_ui()[u], ix.ln, -1, {{ix.ln, ix.buyer(i)}}, "nonowner_up" + a});
      ch.push_back({p.tgamma_di()[u], ix.buyer(i), -1, {{ix.buyer(i), ix.ln}}, "nonowner_down" + a});
    }
  }
  return ch;
}

long long owner_target(const MarketParams& p, long long N, std::size_t i) {
  return std::llround(static_cast<double>(N) * p.m()[i]);
}

void check_counts(const MarketParams& p, const Population& pop) {
  const auto n = static_cast<std::size_t>(state_count(p.kind(), p.K()));
  if (pop.kind != p.kind() || pop.K != p.K() || pop.counts.size() != n)
    throw Error(ErrorCode::InconsistentInitialCounts, "population does not match the model");
  if (pop.N < 1) throw Error(ErrorCode::InconsistentInitialCounts, "N must be >= 1");
  long long sum = 0;
  for (long long c : pop.counts) {
    if (c < 0) throw Error(ErrorCode::InconsistentInitialCounts, "negative count");
    sum += c;
  }
  if (sum != pop.N) throw Error(ErrorCode::InconsistentInitialCounts, "counts do not sum to N");
  const Indices ix{0, 1, p.K(), p.kind()};
  for (int i = 0; i < p.K(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const long long owners = pop.counts[static_cast<std::size_t>(ix.hio(i))] +
                             pop.counts[static_cast<std::size_t>(ix.lio(i))];
    if (owners != owner_target(p, pop.N, u))
      throw Error(ErrorCode::InconsistentInitialCounts,
                  "owner count for asset " + std::to_string(i + 1) + " differs from round(N m_i)");
  }
}

}  // namespace

Population population_from(const MarketParams& params, long long N, const StateDistribution& dist) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be >= 1");
  const StateValues full = full_distribution(dist);
  const Indices ix{0, 1, params.K(), params.kind()};
  Population pop{params.kind(), params.K(), N, std::vector<long long>(full.values.size(), 0), 0, 0.0};
  long long assigned = 0;
  for (int i = 0; i < params.K(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const long long owners = owner_target(params, N, u);
    const long long low = std::clamp<long long>(
        std::llround(static_cast<double>(N) * full.values[static_cast<std::size_t>(ix.lio(i))]), 0, owners);
    pop.counts[static_cast<std::size_t>(ix.lio(i))] = low;
    pop.counts[static_cast<std::size_t>(ix.hio(i))] = owners - low;
    assigned += owners;
  }
  const long long nonowners = N - assigned;
  if (nonowners < 0) throw Error(ErrorCode::InconsistentInitialCounts, "owner totals exceed N");
  long long high = 0;
  const int first_buyer = 1;
  const int n_buyers = params.kind() == ModelKind::NonSegmented ? 1 : params.K();
  for (int b = 0; b < n_buyers; ++b) {
    const auto idx = static_cast<std::size_t>(first_buyer + b);
    const long long c =
        std::clamp<long long>(std::llround(static_cast<double>(N) * full.values[idx]), 0, nonowners - high);
    pop.counts[idx] = c;
    high += c;
  }
  pop.counts[0] = nonowners - high;
  return pop;
}

McTrajectory simulate(const MarketParams& params, const Population& initial, double t_end, std::uint64_t seed,
                      const std::vector<double>& sample_times) {
  check_counts(params, initial);
  if (!(t_end >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t_end must be >= 0");
  if (!std::is_sorted(sample_times.begin(), sample_times.end()))
    throw Error(ErrorCode::InvalidArgument, "sample times must be sorted");
  if (!sample_times.empty() && (sample_times.front() < initial.time || sample_times.back() > t_end))
    throw Error(ErrorCode::InvalidArgument, "sample times must lie within [start, t_end]");

  const auto channels = build_channels(params);
  const std::size_t nc = channels.size();
  const double invN = 1.0 / static_cast<double>(initial.N);

  McTrajectory out;
  out.channel_events.assign(nc, 0);
  for (const auto& c : channels) out.channel_labels.push_back(c.label);
  out.occupation_time.assign(initial.counts.size(), 0.0);

  Population pop = initial;
  pop.rng_seed = seed;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> rates(nc);

  auto record = [&](double t) {
    out.times.push_back(t);
    std::vector<double> f(pop.counts.size());
    for (std::size_t s = 0; s < f.size(); ++s) f[s] = static_cast<double>(pop.counts[s]) * invN;
    out.fractions.push_back(std::move(f));
  };
  auto accrue = [&](double dt) {
    for (std::size_t s = 0; s < pop.counts.size(); ++s) out.occupation_time[s] += dt * static_cast<double>(pop.counts[s]);
  };

  std::size_t next_sample = 0;
  double t = pop.time;
  for (;;) {
    double total = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& ch = channels[c];
      double r = ch.k * static_cast<double>(pop.counts[static_cast<std::size_t>(ch.a)]);
      if (ch.b >= 0) r *= static_cast<double>(pop.counts[static_cast<std::size_t>(ch.b)]) * invN;
      rates[c] = r;
      total += r;
    }
    const double t_next = total > 0.0 ? t + expo(rng) / total : std::numeric_limits<double>::infinity();
    while (next_sample < sample_times.size() && sample_times[next_sample] < t_next) {
      record(sample_times[next_sample]);
      ++next_sample;
    }
    if (t_next > t_end) {
      accrue(t_end - t);
      t = t_end;
      break;
    }
    accrue(t_next - t);
    t = t_next;
    double pick = unit(rng) * total;
    std::size_t c = 0;
    for (; c + 1 < nc; ++c) {
      if (pick < rates[c]) break;
      pick -= rates[c];
    }
    while (rates[c] == 0.0 && c > 0) --c;  // round-off guard at the top end
    for (const auto& [from, to] : channels[c].moves) {
      --pop.counts[static_cast<std::size_t>(from)];
      ++pop.counts[static_cast<std::size_t>(to)];
    }
    ++out.channel_events[c];
    ++out.events;
  }
  pop.time = t;
  out.final_state = std::move(pop);
  return out;
}

std::vector<McTrajectory> simulate_seeds(const MarketParams& params, const Population& initial, double t_end,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::vector<double>& sample_times) {
  std::vector<McTrajectory> out(seeds.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(seeds.size(), std::thread::hardware_concurrency()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t s = w; s < seeds.size(); s += workers)
        out[s] = simulate(params, initial, t_end, seeds[s], sample_times);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

LlnError lln_error(const McTrajectory& mc, const Trajectory& ode) {
  if (mc.times.size() != ode.times.size())
    throw Error(ErrorCode::TimeGridMismatch, "sample counts differ");
  LlnError out;
  for (std::size_t k = 0; k < mc.times.size(); ++k) {
    if (std::abs(mc.times[k] - ode.times[k]) > 1e-12 * std::max(1.0, std::abs(ode.times[k])))
      throw Error(ErrorCode::TimeGridMismatch, "sample times differ at index " + std::to_string(k));
    const StateValues full = full_distribution(ode.states[k]);
    if (full.values.size() != mc.fractions[k].size())
      throw Error(ErrorCode::KindMismatch, "state spaces differ");
    const double g = inf_norm_diff(full.values, mc.fractions[k]);
    out.gaps.push_back(g);
    out.max_gap = std::max(out.max_gap, g);
  }
  return out;
}

}  // namespace otc
