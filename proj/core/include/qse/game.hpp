#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qse/common.hpp"

namespace qse {

struct GameDims {
  int num_states = 0;          // |S|
  int num_leader_actions = 0;  // |A|
  int num_follower_actions = 0;  // |B|
  int horizon = 0;             // H

  bool operator==(const GameDims&) const = default;
  int joint() const { return num_states * num_leader_actions * num_follower_actions; }
};

// Effective horizon eff_h(gamma) = (1 - gamma^h) / (1 - gamma), continued to
// h at gamma = 1.
double effective_horizon(double gamma, int h);

// A prescription maps each follower action b to a distribution over leader
// actions: row b holds the distribution over A.
using Prescription = Eigen::MatrixXd;  // |B| x |A|, row-stochastic

// Per-(h, s) prescriptions for the whole episode.
class LeaderPolicy {
 public:
  LeaderPolicy() = default;
  LeaderPolicy(const GameDims& dims, std::vector<Prescription> prescriptions);

  // Uniform prescription at every (h, s).
  static LeaderPolicy uniform(const GameDims& dims);

  const Prescription& at(int h, int s) const {
    return prescriptions_[h * dims_.num_states + s];
  }
  Prescription& at(int h, int s) {
    return prescriptions_[h * dims_.num_states + s];
  }
  const GameDims& dims() const { return dims_; }

  // pi_h(a | s, b)
  double prob(int h, int s, int b, int a) const { return at(h, s)(b, a); }

  void validate() const;  // throws NonStochasticRow / BadDimension

 private:
  GameDims dims_;
  std::vector<Prescription> prescriptions_;  // indexed h * S + s
};

// Linear constraint <x, r_h(s, a, .)> = level on the follower reward, used to
// pin down the reward scale for farsighted model classes.
struct IdentificationConstraint {
  Eigen::VectorXd weight;  // x(b), |B| entries; <x, 1> must be nonzero
  double level = 0.0;      // varsigma

  double kappa() const;  // ||x||_inf / |<x, 1>|
  void validate() const;
};

// Tabular episodic leader-follower Markov game. Rewards and transitions are
// stored flat; see index helpers below. Immutable after build_* validation.
class MarkovGame {
 public:
  MarkovGame() = default;
  MarkovGame(GameDims dims, Eigen::VectorXd init_dist,
             std::vector<double> leader_reward,
             std::vector<double> follower_reward,
             std::vector<double> transition, double discount,
             double rationality);

  const GameDims& dims() const { return dims_; }
  const Eigen::VectorXd& init_dist() const { return init_dist_; }
  double discount() const { return discount_; }
  double rationality() const { return rationality_; }

  int idx(int h, int s, int a, int b) const {
    return ((h * dims_.num_states + s) * dims_.num_leader_actions + a) *
               dims_.num_follower_actions + b;
  }
  double u(int h, int s, int a, int b) const { return leader_reward_[idx(h, s, a, b)]; }
  double r(int h, int s, int a, int b) const { return follower_reward_[idx(h, s, a, b)]; }
  double p(int h, int s, int a, int b, int s2) const {
    return transition_[idx(h, s, a, b) * dims_.num_states + s2];
  }

  const std::vector<double>& leader_reward() const { return leader_reward_; }
  const std::vector<double>& follower_reward() const { return follower_reward_; }
  const std::vector<double>& transition() const { return transition_; }

  std::vector<double>& mutable_follower_reward() { return follower_reward_; }
  std::vector<double>& mutable_leader_reward() { return leader_reward_; }

  void validate() const;  // enforces all type invariants

 private:
  GameDims dims_;
  Eigen::VectorXd init_dist_;           // rho0 over S
  std::vector<double> leader_reward_;   // u[h][s][a][b]
  std::vector<double> follower_reward_; // r[h][s][a][b]
  std::vector<double> transition_;      // P[h][s][a][b][s']
  double discount_ = 0.0;               // gamma, follower foresight
  double rationality_ = 1.0;            // eta > 0
};

// Validating constructor used by deserialization and generators.
MarkovGame build_tabular_game(GameDims dims, Eigen::VectorXd init_dist,
                              std::vector<double> leader_reward,
                              std::vector<double> follower_reward,
                              std::vector<double> transition, double discount,
                              double rationality);

// Uniform-random game. If a constraint is given, follower rewards are
// projected onto <x, r_h(s,a,.)> = level and clipped back into [0, 1],
// iterating until feasible (throws InfeasibleConstraint after a bounded
// number of rounds).
MarkovGame make_random_game(GameDims dims, double discount, double rationality,
                            std::uint64_t seed,
                            const std::optional<IdentificationConstraint>&
                                constraint = std::nullopt);

}  // namespace qse
