#include "qse/planner.hpp"

#include <cmath>

namespace qse {

LeaderValues leader_values(const MarkovGame& game, const LeaderPolicy& policy,
                           const FollowerSolution& response) {
  const GameDims& d = game.dims();
  if (response.dims != d || policy.dims() != d) {
    throw DimensionMismatch("leader_values: inputs do not match the game");
  }
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions,
            H = d.horizon;
  LeaderValues vals;
  vals.dims = d;
  vals.U.assign(H, std::vector<double>(static_cast<std::size_t>(d.joint()), 0.0));
  vals.W.assign(H + 1, Eigen::VectorXd::Zero(S));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      const Prescription& alpha = policy.at(h, s);
      double w = 0.0;
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) {
          double uv = game.u(h, s, a, b);
          for (int s2 = 0; s2 < S; ++s2) {
            uv += game.p(h, s, a, b, s2) * vals.W[h + 1][s2];
          }
          vals.U[h][(s * A + a) * B + b] = uv;
          w += response.Nu[h](s, b) * alpha(b, a) * uv;
        }
      }
      vals.W[h][s] = w;
    }
  }
  return vals;
}

double evaluate_J(const MarkovGame& game, const LeaderPolicy& policy) {
  FollowerSolution response = quantal_response(game, policy);
  LeaderValues vals = leader_values(game, policy, response);
  return game.init_dist().dot(vals.W[0]);
}

double evaluate_J_model(const MarkovGame& model, const LeaderPolicy& policy) {
  return evaluate_J(model, policy);
}

namespace {

// All compositions of `mesh` into `k` nonnegative parts, lexicographic.
void compositions(int mesh, int k, std::vector<Eigen::VectorXd>& out) {
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(k);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == k - 1) {
      cur[pos] = remaining;
      out.push_back(cur / mesh);
      return;
    }
    for (int v = remaining; v >= 0; --v) {  // puts the deterministic vertices first
      cur[pos] = v;
      rec(pos + 1, remaining - v);
    }
  };
  rec(0, mesh);
}

}  // namespace

PrescriptionGrid PrescriptionGrid::make(int num_leader_actions,
                                        int num_follower_actions, int mesh) {
  if (num_leader_actions <= 0 || num_follower_actions <= 0 || mesh <= 0) {
    throw BadDimension("grid needs positive |A|, |B|, mesh");
  }
  std::vector<Eigen::VectorXd> points;
  compositions(mesh, num_leader_actions, points);
  PrescriptionGrid grid;
  grid.mesh_ = mesh;
  // product over b of the mesh points, lexicographic by (b-index digits)
  std::size_t total = 1;
  for (int b = 0; b < num_follower_actions; ++b) total *= points.size();
  grid.items_.reserve(total);
  std::vector<std::size_t> digit(num_follower_actions, 0);
  for (std::size_t it = 0; it < total; ++it) {
    Prescription alpha(num_follower_actions, num_leader_actions);
    for (int b = 0; b < num_follower_actions; ++b) {
      alpha.row(b) = points[digit[b]].transpose();
    }
    grid.items_.push_back(std::move(alpha));
    for (int b = num_follower_actions - 1; b >= 0; --b) {
      if (++digit[b] < points.size()) break;
      digit[b] = 0;
    }
  }
  return grid;
}

ArgmaxResult prescription_argmax(
    const Eigen::MatrixXd& value_table, const std::vector<Eigen::MatrixXd>& reward_tables,
    double eta, InnerAggregate inner, const PrescriptionGrid& grid,
    const std::function<double(const Prescription&, int)>& adjust) {
  if (grid.size() == 0) throw EmptyGrid("prescription grid is empty");
  if (reward_tables.empty()) throw EmptyThetaSample("no candidate reward tables");
  const int A = static_cast<int>(value_table.rows());
  const int B = static_cast<int>(value_table.cols());

  ArgmaxResult best;
  bool have_best = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Prescription& alpha = grid.at(i);
    if (alpha.cols() != A || alpha.rows() != B) {
      throw DimensionMismatch("grid prescriptions do not match the value table");
    }
    double agg = 0.0;
    int agg_k = 0;
    for (int k = 0; k < static_cast<int>(reward_tables.size()); ++k) {
      Eigen::VectorXd nu = myopic_response(reward_tables[k], alpha, eta);
      double obj = 0.0;
      for (int b = 0; b < B; ++b) {
        obj += nu[b] * alpha.row(b).dot(value_table.col(b));
      }
      if (adjust) obj += adjust(alpha, k);
      if (k == 0 || (inner == InnerAggregate::Min ? obj < agg : obj > agg)) {
        agg = obj;
        agg_k = k;
      }
    }
    if (!have_best || agg > best.value) {
      best.value = agg;
      best.prescription = alpha;
      best.grid_index = i;
      best.theta_index = agg_k;
      have_best = true;
    }
  }
  return best;
}

QseSolution solve_qse_myopic(const MarkovGame& game, const PrescriptionGrid& grid) {
  if (game.discount() != 0.0) {
    throw NotMyopic("exact QSE by dynamic programming requires gamma = 0");
  }
  const GameDims& d = game.dims();
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions,
            H = d.horizon;
  QseSolution sol;
  sol.W.assign(H, Eigen::VectorXd::Zero(S));
  std::vector<Prescription> chosen(static_cast<std::size_t>(H) * S);
  Eigen::VectorXd w_next = Eigen::VectorXd::Zero(S);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      Eigen::MatrixXd value(A, B), reward(A, B);
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) {
          double uv = game.u(h, s, a, b);
          for (int s2 = 0; s2 < S; ++s2) uv += game.p(h, s, a, b, s2) * w_next[s2];
          value(a, b) = uv;
          reward(a, b) = game.r(h, s, a, b);
        }
      }
      ArgmaxResult res = prescription_argmax(value, {reward}, game.rationality(),
                                             InnerAggregate::Max, grid);
      sol.W[h][s] = res.value;
      chosen[h * S + s] = res.prescription;
    }
    w_next = sol.W[h];
  }
  sol.policy = LeaderPolicy(d, std::move(chosen));
  sol.value = game.init_dist().dot(sol.W[0]);
  return sol;
}

double suboptimality(const MarkovGame& game, const LeaderPolicy& policy,
                     double reference_Jstar) {
  return reference_Jstar - evaluate_J(game, policy);
}

}  // namespace qse
