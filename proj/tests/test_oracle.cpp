#include <cmath>

#include "doctest.h"
#include "qse/harness.hpp"
#include "qse/oracle.hpp"
#include "test_util.hpp"

using namespace qse;

TEST_CASE("energy evaluation agrees with direct trajectory enumeration") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame game = make_random_game(dims, 1.0, 1.3, 3);
  LeaderPolicy pi = test::random_policy(dims, 4);
  FollowerSolution sol = quantal_response(game, pi);

  // enumerate all (s1, b1, a1, s2, b2, a2) paths explicitly
  double direct = 0.0;
  for (int s1 = 0; s1 < 2; ++s1) {
    // entropy term at h = 1
    double ent1 = 0.0;
    for (int b = 0; b < 2; ++b) {
      double p = sol.Nu[0](s1, b);
      if (p > 0) ent1 -= p * std::log(p);
    }
    direct += game.init_dist()[s1] * ent1 / game.rationality();
    for (int b1 = 0; b1 < 2; ++b1) {
      for (int a1 = 0; a1 < 2; ++a1) {
        double w1 = game.init_dist()[s1] * sol.Nu[0](s1, b1) * pi.at(0, s1)(b1, a1);
        direct += w1 * game.r(0, s1, a1, b1);
        for (int s2 = 0; s2 < 2; ++s2) {
          double w2 = w1 * game.p(0, s1, a1, b1, s2);
          double ent2 = 0.0;
          for (int b = 0; b < 2; ++b) {
            double p = sol.Nu[1](s2, b);
            if (p > 0) ent2 -= p * std::log(p);
          }
          direct += game.discount() * w2 * ent2 / game.rationality();
          for (int b2 = 0; b2 < 2; ++b2) {
            for (int a2 = 0; a2 < 2; ++a2) {
              direct += game.discount() * w2 * sol.Nu[1](s2, b2) *
                        pi.at(1, s2)(b2, a2) * game.r(1, s2, a2, b2);
            }
          }
        }
      }
    }
  }
  CHECK(evaluate_energy(game, pi, sol.Nu) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("blockwise energy reconstruction matches direct evaluation") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame game = make_random_game(dims, 1.0, 1.0, 5);
  LeaderPolicy pi = test::random_policy(dims, 6);
  FollowerSolution sol = quantal_response(game, pi);
  // perturb one block and compare the affine + entropy reconstruction used by
  // the grid oracle against a full evaluation
  auto rng = make_engine(7);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int h = 0; h < 2; ++h) {
    for (int s = 0; s < 2; ++s) {
      Eigen::VectorXd w(2);
      std::vector<Eigen::MatrixXd> nu = sol.Nu;
      for (int b = 0; b < 2; ++b) {
        nu[h].row(s).setZero();
        nu[h](s, b) = 1.0;
        w[b] = evaluate_energy(game, pi, nu);
      }
      nu[h].row(s).setConstant(0.5);
      double g_unif = evaluate_energy(game, pi, nu);
      double reach = (g_unif - w.mean()) * game.rationality() / std::log(2.0);
      // random interior point
      double x = unif(rng), y = unif(rng);
      double p = x / (x + y);
      nu[h](s, 0) = p;
      nu[h](s, 1) = 1.0 - p;
      double expect = p * w[0] + (1 - p) * w[1] +
                      reach / game.rationality() *
                          (-p * std::log(p) - (1 - p) * std::log(1 - p));
      CHECK(evaluate_energy(game, pi, nu) == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("brute force QSE") {
  SUBCASE("guard rejects oversized enumerations") {
    MarkovGame game = make_random_game({3, 2, 2, 3}, 0.0, 1.0, 11);
    PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 10);
    CHECK_THROWS_AS(brute_force_qse(game, grid, 1000000), TooLarge);
  }
  SUBCASE("single state single step takes the max over the grid") {
    GameDims dims{1, 2, 2, 1};
    MarkovGame game = make_random_game(dims, 0.0, 1.0, 12);
    PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 3);
    BruteForceResult res = brute_force_qse(game, grid);
    CHECK(res.candidates == grid.size());
    double best = -1.0;
    for (const auto& alpha : grid.items()) {
      LeaderPolicy pi(dims, {alpha});
      best = std::max(best, evaluate_J(game, pi));
    }
    CHECK(res.value == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("farsighted reference over an explicit policy list") {
    GameDims dims{2, 2, 2, 2};
    MarkovGame game = make_random_game(dims, 1.0, 1.0, 13);
    double best = -1.0;
    for (int i = 0; i < 6; ++i) {
      best = std::max(best, evaluate_J(game, test::random_policy(dims, 20 + i)));
    }
    CHECK(best > 0.0);
  }
}

TEST_CASE("performance difference oracle") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame game = make_random_game(dims, 0.0, 1.0, 21);
  LeaderPolicy pi = test::random_policy(dims, 22);
  SUBCASE("exact inputs give zero on both sides") {
    FollowerSolution sol = quantal_response(game, pi);
    LeaderValues vals = leader_values(game, pi, sol);
    std::vector<Eigen::VectorXd> W(vals.W.begin(), vals.W.end() - 1);
    PerfDiffReport rep = check_performance_difference(game, pi, vals.U, W, sol);
    CHECK(rep.ok);
    CHECK(std::abs(rep.lhs_general) <= 1e-10);
    CHECK(std::abs(rep.lhs_linear) <= 1e-10);
    CHECK(std::abs(rep.identity_residual) <= 1e-10);
  }
  SUBCASE("random perturbations keep the inequality and identity") {
    for (int i = 0; i < 50; ++i) {
      MarkovGame alt = make_random_game(dims, 0.0, 1.0, 400 + i);
      FollowerSolution nu_t = quantal_response_model(dims, 0.0, 1.0,
                                                     alt.follower_reward(),
                                                     game.transition(), pi);
      LeaderValues vals = leader_values(game, pi, nu_t);
      auto rng = make_engine(500 + i);
      std::uniform_real_distribution<double> unif(-0.2, 0.2);
      std::vector<Eigen::VectorXd> W(dims.horizon);
      for (int h = 0; h < dims.horizon; ++h) {
        W[h] = vals.W[h];
        for (int s = 0; s < dims.num_states; ++s) W[h][s] += unif(rng);
      }
      PerfDiffReport rep = check_performance_difference(game, pi, vals.U, W, nu_t);
      CHECK(rep.ok);
    }
  }
}

TEST_CASE("response bounds oracle: identical solutions have zero LHS") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame game = make_random_game(dims, 0.0, 1.0, 31);
  LeaderPolicy pi = test::random_policy(dims, 32);
  FollowerSolution sol = quantal_response(game, pi);
  BoundsReport rep = check_response_bounds(game, pi, sol, sol, 33);
  CHECK(rep.ok);
  CHECK(rep.a_diff_identity_max_err <= 1e-12);
  CHECK(rep.kl_upper_slack >= -1e-12);
}

TEST_CASE("empirical coverage") {
  GameDims dims{2, 2, 2, 1};
  RandomLinearSpec spec{dims, 3, 0.0, 1.0, 1.0};
  LinearGame lg = make_random_linear_game(spec, 41);
  SUBCASE("infinite beta covers always") {
    CoverageSpec cs;
    cs.T = 30;
    cs.reps = 10;
    cs.beta_override = 1e18;
    CHECK(empirical_coverage(lg.game, lg.params, cs, 42) == 1.0);
  }
  SUBCASE("coverage is monotone in beta") {
    CoverageSpec lo;
    lo.T = 60;
    lo.reps = 20;
    lo.beta_override = 1e-6;
    CoverageSpec hi = lo;
    hi.beta_override = 50.0;
    double c_lo = empirical_coverage(lg.game, lg.params, lo, 43);
    double c_hi = empirical_coverage(lg.game, lg.params, hi, 43);
    CHECK(c_hi >= c_lo);
    CHECK(c_hi >= 0.9);
  }
}

TEST_CASE("chi-square p-values against known quantiles") {
  // P(chi2_1 > 3.841) = 0.05, P(chi2_2 > 5.991) = 0.05
  CHECK(chi_square_pvalue(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi_square_pvalue(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi_square_pvalue(0.0, 3) == 1.0);
  CHECK(gamma_q(2.5, 100.0) < 1e-30);
}

TEST_CASE("verify battery passes at reduced instance counts") {
  std::vector<CheckResult> results = run_verify_battery(7, 20, 60);
  for (const auto& r : results) {
    INFO(r.name, " slack=", r.slack, " detail=", r.detail);
    CHECK(r.passed);
  }
  std::string xml = to_junit_xml(results);
  CHECK(xml.find("<testsuite") != std::string::npos);
  CHECK(xml.find("failures=\"0\"") != std::string::npos);
}
