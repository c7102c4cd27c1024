#include <cmath>

#include "doctest.h"
#include "qse/oracle.hpp"
#include "qse/planner.hpp"
#include "qse/rng.hpp"
#include "test_util.hpp"

using namespace qse;

TEST_CASE("leader values: zero reward and single step") {
  GameDims dims{2, 2, 2, 1};
  Eigen::VectorXd rho0(2);
  rho0 << 0.4, 0.6;
  std::size_t joint = dims.joint();
  SUBCASE("u = 0 everywhere") {
    std::vector<double> u(joint, 0.0), r(joint, 0.3), P(joint * 2, 0.5);
    MarkovGame game = build_tabular_game(dims, rho0, u, r, P, 0.0, 1.0);
    LeaderPolicy pi = test::random_policy(dims, 1);
    FollowerSolution sol = quantal_response(game, pi);
    LeaderValues vals = leader_values(game, pi, sol);
    CHECK(vals.W[0].cwiseAbs().maxCoeff() == 0.0);
    for (double v : vals.U[0]) CHECK(v == 0.0);
  }
  SUBCASE("H = 1 reduces to the immediate expectation") {
    MarkovGame game = make_random_game(dims, 0.0, 1.0, 2);
    LeaderPolicy pi = test::random_policy(dims, 3);
    FollowerSolution sol = quantal_response(game, pi);
    LeaderValues vals = leader_values(game, pi, sol);
    for (int s = 0; s < 2; ++s) {
      double expect = 0.0;
      for (int b = 0; b < 2; ++b) {
        for (int a = 0; a < 2; ++a) {
          CHECK(vals.u_at(0, s, a, b) == doctest::Approx(game.u(0, s, a, b)));
          expect += sol.Nu[0](s, b) * pi.at(0, s)(b, a) * game.u(0, s, a, b);
        }
      }
      CHECK(vals.W[0][s] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("leader values satisfy the Bellman consistency invariants") {
  GameDims dims{3, 2, 2, 3};
  MarkovGame game = make_random_game(dims, 0.0, 1.0, 11);
  LeaderPolicy pi = test::random_policy(dims, 12);
  FollowerSolution sol = quantal_response(game, pi);
  LeaderValues vals = leader_values(game, pi, sol);
  for (int h = 0; h < dims.horizon; ++h) {
    for (int s = 0; s < dims.num_states; ++s) {
      double w = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          double expect = game.u(h, s, a, b);
          for (int s2 = 0; s2 < 3; ++s2) {
            expect += game.p(h, s, a, b, s2) * vals.W[h + 1][s2];
          }
          CHECK(vals.u_at(h, s, a, b) == doctest::Approx(expect).epsilon(1e-10));
          CHECK(vals.u_at(h, s, a, b) >= -1e-10);
          CHECK(vals.u_at(h, s, a, b) <= dims.horizon - h + 1e-10);
          w += sol.Nu[h](s, b) * pi.at(h, s)(b, a) * vals.u_at(h, s, a, b);
        }
      }
      CHECK(vals.W[h][s] == doctest::Approx(w).epsilon(1e-10));
    }
  }
}

TEST_CASE("J matches a Monte-Carlo estimate within 3 sigma") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame game = make_random_game(dims, 0.0, 1.0, 21);
  LeaderPolicy pi = test::random_policy(dims, 22);
  FollowerSolution sol = quantal_response(game, pi);
  double J = evaluate_J(game, pi);
  const int N = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    Trajectory t = sample_trajectory(game, pi, sol, 40000 + i);
    double ret = 0.0;
    for (const auto& st : t.steps) ret += st.u;
    sum += ret;
    sumsq += ret * ret;
  }
  double mean = sum / N;
  double var = sumsq / N - mean * mean;
  double sigma = std::sqrt(var / N);
  CHECK(std::abs(mean - J) <= 3.0 * sigma + 1e-9);
}

TEST_CASE("grid contains all deterministic prescriptions") {
  PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 4);
  int deterministic = 0;
  for (const auto& alpha : grid.items()) {
    bool det = true;
    for (int b = 0; b < 2; ++b) {
      if (alpha.row(b).maxCoeff() < 1.0 - 1e-12) det = false;
    }
    if (det) ++deterministic;
  }
  CHECK(deterministic == 4);  // |A|^|B|
  CHECK(grid.size() == 25);   // (mesh points = 5)^2
}

TEST_CASE("prescription argmax basics") {
  PrescriptionGrid grid = PrescriptionGrid::make(2, 1, 4);
  SUBCASE("constant objective returns the lexicographically first prescription") {
    Eigen::MatrixXd value = Eigen::MatrixXd::Constant(2, 1, 0.7);
    Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(2, 1);
    ArgmaxResult res = prescription_argmax(value, {reward}, 1.0,
                                           InnerAggregate::Max, grid);
    CHECK(res.value == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(res.grid_index == 0);
  }
  SUBCASE("dominant leader action is selected deterministically") {
    Eigen::MatrixXd value(2, 1);
    value << 1.0, 0.0;  // U(s, a1) = 1, U(s, a2) = 0
    Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(2, 1);
    ArgmaxResult res = prescription_argmax(value, {reward}, 1.0,
                                           InnerAggregate::Max, grid);
    CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.prescription(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("errors on empty inputs") {
    Eigen::MatrixXd value = Eigen::MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(prescription_argmax(value, {}, 1.0, InnerAggregate::Max, grid),
                    EmptyThetaSample);
  }
}

TEST_CASE("mesh refinement converges") {
  for (int i = 0; i < 5; ++i) {
    GameDims dims{2, 2, 2, 2};
    MarkovGame game = make_random_game(dims, 0.0, 1.0, 700 + i);
    QseSolution coarse = solve_qse_myopic(game, PrescriptionGrid::make(2, 2, 20));
    QseSolution fine = solve_qse_myopic(game, PrescriptionGrid::make(2, 2, 40));
    CHECK(std::abs(coarse.value - fine.value) <= 0.02 * dims.horizon);
    // nested grids: finer never decreases the optimum
    CHECK(fine.value >= coarse.value - 1e-12);
  }
}

TEST_CASE("action-independent leader reward makes every policy optimal") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame base = make_random_game(dims, 0.0, 1.0, 31);
  // u and P independent of (a, b): the leader's choices cannot matter
  std::vector<double> u = base.leader_reward();
  std::vector<double> P = base.transition();
  for (int h = 0; h < 2; ++h) {
    for (int s = 0; s < 2; ++s) {
      double v = base.u(h, s, 0, 0);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          u[base.idx(h, s, a, b)] = v;
          for (int s2 = 0; s2 < 2; ++s2) {
            P[base.idx(h, s, a, b) * 2 + s2] = base.p(h, s, 0, 0, s2);
          }
        }
      }
    }
  }
  MarkovGame game = build_tabular_game(dims, base.init_dist(), u,
                                       base.follower_reward(), P, 0.0, 1.0);
  PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 3);
  QseSolution sol = solve_qse_myopic(game, grid);
  LeaderPolicy other = test::random_policy(dims, 32);
  CHECK(evaluate_J(game, other) == doctest::Approx(sol.value).epsilon(1e-9));
}

TEST_CASE("dynamic programming equals exhaustive enumeration over the grid") {
  for (int i = 0; i < 8; ++i) {
    GameDims dims{2, 2, 2, 2};
    MarkovGame game = make_random_game(dims, 0.0, 1.0, 800 + i);
    PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 2);
    QseSolution dp = solve_qse_myopic(game, grid);
    BruteForceResult bf = brute_force_qse(game, grid);
    CHECK(dp.value == doctest::Approx(bf.value).epsilon(1e-9));
  }
  // largest configuration of the DP-optimality property: |S| = 3, H = 3 on
  // the deterministic grid, 4^9 candidate policies
  GameDims dims{3, 2, 2, 3};
  MarkovGame game = make_random_game(dims, 0.0, 1.0, 811);
  PrescriptionGrid det = PrescriptionGrid::make(2, 2, 1);
  QseSolution dp = solve_qse_myopic(game, det);
  BruteForceResult bf = brute_force_qse(game, det, 300000);
  CHECK(dp.value == doctest::Approx(bf.value).epsilon(1e-12));
}

TEST_CASE("NotMyopic guard") {
  MarkovGame game = make_random_game({2, 2, 2, 2}, 0.5, 1.0, 41);
  PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 2);
  CHECK_THROWS_AS(solve_qse_myopic(game, grid), NotMyopic);
}

TEST_CASE("suboptimality is zero at the optimum and positive off it") {
  GameDims dims{2, 2, 2, 2};
  MarkovGame game = make_random_game(dims, 0.0, 1.0, 51);
  PrescriptionGrid grid = PrescriptionGrid::make(2, 2, 6);
  QseSolution sol = solve_qse_myopic(game, grid);
  CHECK(suboptimality(game, sol.policy, sol.value) == doctest::Approx(0.0).epsilon(1e-10));
  // any grid policy scores >= 0
  LeaderPolicy grid_policy(dims, std::vector<Prescription>(
                                     static_cast<std::size_t>(dims.horizon) * 2,
                                     grid.at(3)));
  CHECK(suboptimality(game, grid_policy, sol.value) >= -1e-10);
  // a uniform-random policy on a game with a strict optimum is strictly worse
  LeaderPolicy random_pi = test::random_policy(dims, 52);
  double direct = sol.value - evaluate_J(game, random_pi);
  CHECK(suboptimality(game, random_pi, sol.value) == doctest::Approx(direct).epsilon(1e-12));
}
