#include <cmath>
#include <random>

#include "doctest.h"
#include "otc/dynamics.hpp"
#include "otc/equilibrium.hpp"
#include "otc/error.hpp"
#include "otc/linalg.hpp"
#include "otc/stability.hpp"
#include "support.hpp"

using namespace otc;
using otc::testing::baseline;

TEST_SUITE("equilibrium") {
  TEST_CASE("F at the ends of the bracket") {
    const auto p = baseline(ModelKind::NonSegmented);
    CHECK(eval_F(p, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    const double S = p.free_mass();
    CHECK(eval_F(p, S) < -p.gamma_d() * S);
    const double h = 1e-6;
    CHECK(eval_F_prime(p, 0.05) == doctest::Approx((eval_F(p, 0.05 + h) - eval_F(p, 0.05 - h)) / (2 * h)).epsilon(1e-6));
  }

  TEST_CASE("no meetings: decoupled chains") {
    RawParams raw = otc::testing::baseline_raw(ModelKind::NonSegmented);
    raw.lambda = std::vector<double>{0.0, 0.0};
    (*raw.gamma_di)[1] = 1.5;
    const auto p = UncheckedParamsAccess::build(ModelKind::NonSegmented, raw);
    CHECK(eval_F(p, 0.07) == doctest::Approx(5 * 0.2 - 5.5 * 0.07));
    const auto ss = solve_nonseg_steady(p);
    CHECK(ss.dist.h_n() == doctest::Approx(5 * 0.2 / 5.5).epsilon(1e-13));
    CHECK(ss.dist.li_o(1) == doctest::Approx(1.5 * 0.4 / 6.5).epsilon(1e-13));
  }

  TEST_CASE("baseline, non-segmented") {
    const auto ss = solve_nonseg_steady(baseline(ModelKind::NonSegmented));
    CHECK(ss.residual_inf_norm < 1e-12);
    CHECK(ss.dist.h_n() == doctest::Approx(0.111843745).epsilon(1e-8));
    CHECK(ss.dist.li_o(0) == doctest::Approx(0.00137642).epsilon(1e-5));
    CHECK(ss.dist.l_n() == doctest::Approx(0.08815625).epsilon(1e-7));
    REQUIRE(ss.root.has_value());
    CHECK(ss.root->f_lo > 0);
    CHECK(ss.root->f_hi < 0);
  }

  TEST_CASE("baseline, segmented") {
    const auto p = baseline(ModelKind::PartiallySegmented);
    const auto ss = solve_seg_steady_k2(p);
    CHECK(ss.residual_inf_norm < 1e-12);
    CHECK(ss.dist.hi_n(0) == doctest::Approx(0.07721734).epsilon(1e-7));
    CHECK(ss.dist.li_o(0) == doctest::Approx(0.00196037).epsilon(1e-5));
    CHECK(ss.dist.l_n() == doctest::Approx(0.04556533).epsilon(1e-6));
    CHECK(std::abs(ss.dist.hi_n(0) - ss.dist.hi_n(1)) < 1e-12);
    CHECK_FALSE(ss.multiple_intersections);
    CHECK(steady_residual(p, ss.dist) < 1e-12);
  }

  TEST_CASE("general segmented solver agrees with the two-asset curves") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 25; ++k) {
      const auto p = sample_params(ModelKind::PartiallySegmented, 2, rng, {1e-1, 1e3, 0.05, 0.95});
      const auto a = solve_seg_steady_k2(p);
      const auto b = solve_seg_steady_general(p);
      CHECK(inf_norm_diff(a.dist.reduced(), b.dist.reduced()) < 1e-10);
    }
  }

  TEST_CASE("one asset: every solver gives the same point") {
    const auto [ns, sg] = otc::testing::matched_k1(1250, 5, 0.5, 5, 0.5, 0.4);
    const auto a = solve_nonseg_steady(ns);
    const auto b = solve_seg_steady_general(sg);
    CHECK(inf_norm_diff(a.dist.reduced(), b.dist.reduced()) < 1e-12);
    CHECK(inf_norm_diff(a.dist.reduced(), solve_steady(sg).dist.reduced()) < 1e-12);
  }

  TEST_CASE("three symmetric assets") {
    RawParams raw;
    raw.K = 3;
    raw.lambda = std::vector<double>(3, 800);
    raw.gamma_ui = std::vector<double>(3, 4);
    raw.gamma_di = std::vector<double>(3, 0.6);
    raw.tgamma_ui = std::vector<double>(3, 4);
    raw.tgamma_di = std::vector<double>(3, 0.6);
    raw.m = std::vector<double>(3, 0.8 / 3);
    const auto p = make_params(ModelKind::PartiallySegmented, raw);
    const auto ss = solve_steady(p);
    CHECK(ss.method == SteadyMethod::DampedFixedPoint);
    CHECK(std::abs(ss.dist.hi_n(0) - ss.dist.hi_n(1)) < 1e-12);
    CHECK(std::abs(ss.dist.hi_n(0) - ss.dist.hi_n(2)) < 1e-12);
    CHECK(ss.residual_inf_norm < 1e-12);
  }

  TEST_CASE("random draws reach small residuals") {
    std::mt19937_64 rng(11);
    for (int K : {1, 2, 3, 5}) {
      for (int k = 0; k < 20; ++k) {
        const auto p = sample_params(ModelKind::NonSegmented, K, rng);
        CHECK(steady_residual(p, solve_steady(p).dist) < 1e-9);
        const auto s = sample_params(ModelKind::PartiallySegmented, K, rng);
        CHECK(steady_residual(s, solve_steady(s).dist) < 1e-9);
      }
    }
  }

  TEST_CASE("long integration lands on the steady state") {
    for (auto kind : {ModelKind::NonSegmented, ModelKind::PartiallySegmented}) {
      const auto p = baseline(kind);
      IntegrateOptions o;
      o.t_end = 20;
      o.dt = 1e-3;
      o.record_every = 100000;
      const auto tr = integrate(p, all_low_owners(p), o);
      CHECK(inf_norm_diff(tr.states.back().reduced(), solve_steady(p).dist.reduced()) < 1e-6);
    }
  }
}
