#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qse/game.hpp"

namespace qse {

// Linear factorization of a game: P_h(s'|s,a,b) = <phi_h(s,a,b), varpi_h(s')>,
// u_h = <phi_h, vartheta_h>, r_h = <phi_h, theta_h>.
struct LinearGameParams {
  int dim = 0;               // d
  double feature_bound = 1;  // B_phi >= max ||phi||_2
  double param_bound = 1;    // B_Theta >= max ||theta_h||_2

  // phi[h] is (S*A*B) x d; row index matches MarkovGame::idx at fixed h.
  std::vector<Eigen::MatrixXd> phi;
  std::vector<Eigen::VectorXd> theta;     // follower reward params, d each
  std::vector<Eigen::VectorXd> vartheta;  // leader reward params, d each
  // varpi[h] is d x S; column s' is the factor varpi_h(s').
  std::vector<Eigen::MatrixXd> varpi;

  int horizon() const { return static_cast<int>(phi.size()); }

  const Eigen::MatrixXd& features(int h) const { return phi[h]; }
  Eigen::VectorXd feature(const GameDims& dims, int h, int s, int a, int b) const {
    int row = (s * dims.num_leader_actions + a) * dims.num_follower_actions + b;
    return phi[h].row(row).transpose();
  }
};

// One-hot embedding with d = S*A*B; reproduces (u, r, P) exactly.
LinearGameParams embed_linear(const MarkovGame& game);

// Materializes the tabular game defined by linear parameters.
MarkovGame game_from_linear(const GameDims& dims, const LinearGameParams& params,
                            const Eigen::VectorXd& init_dist, double discount,
                            double rationality);

// Tabular follower rewards r_h(s,a,b) = <phi_h(s,a,b), theta_h> for candidate
// parameters (used when planning against a hypothesized behavior model).
std::vector<double> materialize_rewards(const GameDims& dims,
                                        const LinearGameParams& params,
                                        const std::vector<Eigen::VectorXd>& theta);

// Random low-dimensional linear game: features are Dirichlet rows on the
// d-simplex and each varpi coordinate is a distribution over S, so
// <phi, varpi(.)> is automatically a valid transition row. Rewards satisfy
// r = <phi, theta*> in [0, reward_scale].
struct RandomLinearSpec {
  GameDims dims;
  int dim = 4;
  double discount = 0.0;
  double rationality = 1.0;
  double reward_scale = 1.0;  // theta*, vartheta* drawn from [0, reward_scale]^d
};
struct LinearGame {
  MarkovGame game;
  LinearGameParams params;
};
LinearGame make_random_linear_game(const RandomLinearSpec& spec, std::uint64_t seed);

// max_{h,s,a,b} | <phi, theta> - r | — used to validate reproduction.
double linear_reproduction_error(const MarkovGame& game, const LinearGameParams& params);

}  // namespace qse
