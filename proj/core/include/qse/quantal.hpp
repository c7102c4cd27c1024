#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qse/game.hpp"

namespace qse {

// Follower's soft value functions and quantal response for one (model,
// policy) pair. Per step h: Q(s,b), V(s), advantage A(s,b) = Q - V and
// nu(b|s) = exp(eta * A).
struct FollowerSolution {
  std::vector<Eigen::MatrixXd> Q;    // H entries, S x B
  std::vector<Eigen::VectorXd> V;    // H entries, S
  std::vector<Eigen::MatrixXd> Adv;  // H entries, S x B
  std::vector<Eigen::MatrixXd> Nu;   // H entries, S x B, rows sum to 1
  double gamma = 0.0;
  double eta = 1.0;
  double advantage_bound = 0.0;  // B_A for the model it was computed from
  GameDims dims;

  const Eigen::MatrixXd& nu(int h) const { return Nu[h]; }
};

// B_A = (1 + eff_H(gamma)) * (eta^{-1} log|B| + 1); bounds |Q|, |V|, |A|.
double advantage_bound(const MarkovGame& game);
double advantage_bound(double gamma, double eta, int num_follower_actions, int horizon);

// Exact quantal response by backward soft value iteration:
//   Q_h = r_h^pi + gamma * P_h^pi V_{h+1},  V_h = eta^{-1} logsumexp(eta Q_h),
//   nu_h = softmax(eta Q_h). log-sum-exp uses max subtraction.
FollowerSolution quantal_response(const MarkovGame& game, const LeaderPolicy& policy);

// Same recursion under substitute follower rewards (and optionally substitute
// transitions); used when the model parameter is a hypothesis rather than the
// truth. Reward/transition layouts match MarkovGame.
FollowerSolution quantal_response_model(const GameDims& dims, double gamma,
                                        double eta,
                                        const std::vector<double>& follower_reward,
                                        const std::vector<double>& transition,
                                        const LeaderPolicy& policy);

// Myopic response at a single state: nu(b) proportional to
// exp(eta * sum_a alpha(a|b) reward(a,b)). reward_ab is A x B.
Eigen::VectorXd myopic_response(const Eigen::MatrixXd& reward_ab,
                                const Prescription& alpha, double eta);

// Numerically stable log(sum_i exp(x_i)).
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x);

struct DistReport {
  double tv = 0.0;
  double hellinger = 0.0;
  double kl = 0.0;
};

// tv = 0.5*sum|p-q|, hellinger^2 = 0.5*sum(sqrt(p)-sqrt(q))^2,
// kl = sum_{p>0} p log(p/q). Throws SupportMismatch when q = 0 on p's
// support; entries with p = 0 contribute 0 to kl.
DistReport dist_metrics(const Eigen::Ref<const Eigen::VectorXd>& p,
                        const Eigen::Ref<const Eigen::VectorXd>& q);

}  // namespace qse
