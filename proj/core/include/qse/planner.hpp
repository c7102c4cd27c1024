#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "qse/game.hpp"
#include "qse/quantal.hpp"

namespace qse {

// Leader's U/W functions under a joint (policy, response) pair.
struct LeaderValues {
  std::vector<std::vector<double>> U;  // H entries, flat (s,a,b)
  std::vector<Eigen::VectorXd> W;      // H+1 entries, S (W[H] = 0)
  GameDims dims;

  double u_at(int h, int s, int a, int b) const {
    return U[h][(s * dims.num_leader_actions + a) * dims.num_follower_actions + b];
  }
};

// Backward evaluation: U_h = u_h + P_h W_{h+1}, W_h = <U_h, pi tensor nu>.
LeaderValues leader_values(const MarkovGame& game, const LeaderPolicy& policy,
                           const FollowerSolution& response);

// J(pi) = E_{rho0}[W_1] under the true quantal response of `game`.
double evaluate_J(const MarkovGame& game, const LeaderPolicy& policy);

// J(pi, M): leader return when the follower responds to pi under model M and
// the env itself is M (used by the model-based farsighted learners).
double evaluate_J_model(const MarkovGame& model, const LeaderPolicy& policy);

// Finite search set over prescriptions: the product over b of the simplex
// mesh with coordinates in multiples of 1/mesh. Contains all |A|^|B|
// deterministic prescriptions (the simplex vertices).
class PrescriptionGrid {
 public:
  static PrescriptionGrid make(int num_leader_actions, int num_follower_actions,
                               int mesh);

  const std::vector<Prescription>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const Prescription& at(std::size_t i) const { return items_[i]; }
  int mesh() const { return mesh_; }

 private:
  std::vector<Prescription> items_;
  int mesh_ = 0;
};

enum class InnerAggregate { Min, Max };

struct ArgmaxResult {
  Prescription prescription;
  double value = 0.0;
  std::size_t grid_index = 0;
  int theta_index = 0;  // which candidate attained the inner min/max
};

// Exhaustive scan of the grid. For each prescription alpha the candidate
// response is nu^{alpha, theta}(.|s) = softmax(eta * r^{alpha,theta}(s, .))
// with r^{alpha,theta}(s,.) read from reward_tables[k] (A x B, one table per
// candidate theta). Objective per (alpha, k):
//   <value_table, alpha tensor nu> + adjust(alpha, k)
// aggregated over k by `inner`, maximized over alpha. Ties keep the earlier
// grid index.
ArgmaxResult prescription_argmax(
    const Eigen::MatrixXd& value_table,  // A x B
    const std::vector<Eigen::MatrixXd>& reward_tables, double eta,
    InnerAggregate inner, const PrescriptionGrid& grid,
    const std::function<double(const Prescription&, int)>& adjust = nullptr);

// Exact myopic QSE over the grid by dynamic programming (gamma must be 0).
struct QseSolution {
  LeaderPolicy policy;
  double value = 0.0;                  // J*
  std::vector<Eigen::VectorXd> W;      // optimal W_h per step
};
QseSolution solve_qse_myopic(const MarkovGame& game, const PrescriptionGrid& grid);

// J* - J(pi); may be slightly negative when pi is off-grid. Reported as-is.
double suboptimality(const MarkovGame& game, const LeaderPolicy& policy,
                     double reference_Jstar);

}  // namespace qse
