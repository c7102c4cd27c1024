#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "qse/offline.hpp"

namespace qse {

// Interaction boundary for online learners. Exposes dimensions, horizon,
// rationality, and the public feature map; the true rewards/transitions stay
// private, so learner code cannot read theta* or M*.
class OnlineEnv {
 public:
  OnlineEnv(MarkovGame game, LinearGameParams params, std::uint64_t seed);

  const GameDims& dims() const { return dims_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  const Eigen::VectorXd& init_dist() const { return init_dist_; }
  const LinearGameParams& features() const { return params_; }

  // Announces a policy, plays one episode against the true quantal response,
  // and returns the observed trajectory (states, joint actions, leader
  // rewards).
  Trajectory announce(const LeaderPolicy& policy);

  int episodes_played() const { return episode_; }

 private:
  GameDims dims_;
  double eta_, gamma_;
  Eigen::VectorXd init_dist_;
  LinearGameParams params_;
  MarkovGame game_;  // hidden from learners
  std::uint64_t seed_;
  int episode_ = 0;
};

struct RegretRow {
  int t = 0;
  double J_pi = 0.0;
  double subopt = 0.0;
  double cum_regret = 0.0;
};

struct RegretTrace {
  std::vector<RegretRow> rows;
  std::vector<LeaderPolicy> announced;
  Dataset data;
  double J_star = 0.0;
  // Diagnostics filled by the runner, e.g. truth membership in the
  // confidence set per episode (evaluation-only bookkeeping).
  std::vector<int> truth_in_confidence;
  // The learner's optimistic estimate of the initial value per episode
  // (E_{rho0}[W_hat_1] for OVI, the argmax objective for GOLF/OMLE).
  std::vector<double> optimistic_values;
};

// Exact J(pi) under the true game; supplied by the harness for the regret
// trace only, never consulted by the decision logic.
using ExactEvaluator = std::function<double(const LeaderPolicy&)>;

// Online MLE-OVI (linear, myopic; schemes S4/S5): ridge value iteration with
// additive bonuses, per-episode MLE refits warm-started from the previous
// episode.
RegretTrace mle_ovi(OnlineEnv& env, int T, Scheme scheme, const LearnerParams& lp,
                    const PrescriptionGrid& grid, std::uint64_t seed,
                    const ExactEvaluator& exact_J, double J_star);

// Online MLE-GOLF over finite classes: joint confidence set from the MLE
// sublevel test and the optimistic Bellman loss, greedy acting.
RegretTrace mle_golf(OnlineEnv& env, int T, const std::vector<UTuple>& U_class,
                     const std::vector<ThetaTuple>& theta_class, double beta,
                     const PrescriptionGrid& grid, std::uint64_t seed,
                     const ExactEvaluator& exact_J, double J_star,
                     int truth_theta_index = -1, int truth_U_index = -1);

// Online OMLE (farsighted, finite model class): optimistic argmax over
// policies and models in the generalized-likelihood sublevel set.
RegretTrace omle_farsighted(OnlineEnv& env, int T,
                            const std::vector<MarkovGame>& model_class,
                            const std::vector<LeaderPolicy>& policy_class,
                            double beta, std::uint64_t seed,
                            const ExactEvaluator& exact_J, double J_star,
                            int truth_model_index = -1);

// GOLF loss with the optimistic inner maximum over the prescription grid.
double bellman_loss_online(const UTuple& U, int h, const ThetaTuple& theta,
                           const Dataset& data, const LinearGameParams& params,
                           const GameDims& dims, double eta,
                           const PrescriptionGrid& grid);

}  // namespace qse
