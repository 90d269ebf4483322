#include <cmath>

#include "doctest.h"
#include "otc/dynamics.hpp"
#include "otc/error.hpp"
#include "otc/mcsim.hpp"
#include "support.hpp"

using namespace otc;
using otc::testing::baseline;

namespace {

MarketParams single_asset(double lambda, double m) {
  RawParams raw;
  raw.K = 1;
  raw.lambda = std::vector<double>{lambda};
  raw.gamma_u = 5;
  raw.gamma_d = 0.5;
  raw.gamma_ui = std::vector<double>{3};
  raw.gamma_di = std::vector<double>{0.7};
  raw.m = std::vector<double>{m};
  return UncheckedParamsAccess::build(ModelKind::NonSegmented, raw);
}

}  // namespace

TEST_SUITE("mcsim") {
  TEST_CASE("initial counts from a distribution") {
    const auto p = baseline(ModelKind::PartiallySegmented);
    const auto pop = population_from(p, 1001, all_low_owners(p));
    CHECK(pop.counts == std::vector<long long>{201, 0, 0, 0, 0, 400, 400});
    long long total = 0;
    for (auto c : pop.counts) total += c;
    CHECK(total == 1001);
  }

  TEST_CASE("inconsistent counts are rejected") {
    const auto p = baseline(ModelKind::NonSegmented);
    auto pop = population_from(p, 1000, all_low_owners(p));
    pop.counts[0] -= 1;
    CHECK_THROWS_AS(simulate(p, pop, 1.0, 1, {}), Error);
    pop = population_from(p, 1000, all_low_owners(p));
    pop.counts[0] -= 1;
    pop.counts[2] += 1;  // one extra owner of asset 1
    try {
      (void)simulate(p, pop, 1.0, 1, {});
      FAIL("expected InconsistentInitialCounts");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InconsistentInitialCounts);
    }
  }

  TEST_CASE("conservation and determinism") {
    const auto p = baseline(ModelKind::PartiallySegmented);
    const auto pop = population_from(p, 5000, all_low_owners(p));
    const std::vector<double> times{0.0, 0.5, 1.0};
    const auto a = simulate(p, pop, 1.0, 42, times);
    const auto b = simulate(p, pop, 1.0, 42, times);
    const auto c = simulate(p, pop, 1.0, 43, times);
    CHECK(a.fractions == b.fractions);
    CHECK(a.events == b.events);
    CHECK(a.fractions != c.fractions);
    const auto& f = a.final_state.counts;
    CHECK(f[3] + f[5] == 2000);
    CHECK(f[4] + f[6] == 2000);
    long long total = 0;
    for (auto x : f) total += x;
    CHECK(total == 5000);
    CHECK(a.channel_events[0] > 0);  // trades happened
  }

  TEST_CASE("parallel seeds keep their order") {
    const auto p = baseline(ModelKind::NonSegmented);
    const auto pop = population_from(p, 2000, all_low_owners(p));
    const std::vector<double> times{0.5};
    const auto runs = simulate_seeds(p, pop, 0.5, {9, 10, 11}, times);
    CHECK(runs[1].fractions == simulate(p, pop, 0.5, 10, times).fractions);
  }

  TEST_CASE("non-owner two-state chain without meetings") {
    const auto p = single_asset(0.0, 0.4);
    const long long N = 100000;
    const auto pop = population_from(p, N, all_low_owners(p));
    const auto run = simulate(p, pop, 10.0, 2024, {10.0});
    const double nonowners = 0.6 * N;
    const double share = run.fractions[0][1] * N / nonowners;  // (h,n) share of non-owners
    const double pstar = 5.0 / 5.5;
    const double se = std::sqrt(pstar * (1 - pstar) / nonowners);
    CHECK(std::abs(share - pstar) < 3 * se);
  }

  TEST_CASE("isolated owner switches at the owner rates") {
    const auto p = single_asset(1000.0, 0.6);
    Population pop{ModelKind::NonSegmented, 1, 1, {0, 0, 0, 1}, 0, 0.0};
    const auto run = simulate(p, pop, 20000.0, 77, {});
    // channel order: trade, owner_up, owner_down, nonowner_up, nonowner_down
    CHECK(run.channel_events[0] == 0);
    const double up = static_cast<double>(run.channel_events[1]) / run.occupation_time[3];
    const double down = static_cast<double>(run.channel_events[2]) / run.occupation_time[2];
    CHECK(std::abs(up - 3.0) < 5 * 3.0 / std::sqrt(static_cast<double>(run.channel_events[1])));
    CHECK(std::abs(down - 0.7) < 5 * 0.7 / std::sqrt(static_cast<double>(run.channel_events[2])));
  }

  TEST_CASE("gap to the mean-field limit") {
    const auto p = baseline(ModelKind::NonSegmented);
    IntegrateOptions o;
    o.t_end = 1.0;
    o.dt = 1e-4;
    o.record_every = 2500;
    const auto ode = integrate(p, all_low_owners(p), o);
    const auto pop = population_from(p, 100000, all_low_owners(p));
    const auto mc = simulate(p, pop, 1.0, 5, ode.times);
    const auto err = lln_error(mc, ode);
    CHECK(err.gaps.size() == ode.times.size());
    CHECK(err.gaps.front() < 1e-12);
    CHECK(err.max_gap < 0.01);

    auto shifted = mc;
    shifted.times[2] += 1e-3;
    CHECK_THROWS_AS(lln_error(shifted, ode), Error);
    shifted.times.pop_back();
    CHECK_THROWS_AS(lln_error(shifted, ode), Error);
  }

  TEST_CASE("identical inputs give zero gaps") {
    const auto p = baseline(ModelKind::NonSegmented);
    IntegrateOptions o;
    o.t_end = 0.2;
    o.dt = 1e-3;
    o.record_every = 50;
    const auto ode = integrate(p, all_low_owners(p), o);
    McTrajectory mc;
    mc.times = ode.times;
    for (const auto& s : ode.states) mc.fractions.push_back(full_distribution(s).values);
    const auto err = lln_error(mc, ode);
    CHECK(err.max_gap == 0.0);
  }
}
