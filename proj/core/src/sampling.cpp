#include <random>

#include "qse/quantal.hpp"
#include "qse/rng.hpp"
#include "qse/trajectory.hpp"

namespace qse {

void Dataset::append(Trajectory traj, LeaderPolicy policy) {
  traj.policy_id = static_cast<int>(policies.size());
  policies.push_back(std::move(policy));
  trajectories.push_back(std::move(traj));
}

void Dataset::validate(const GameDims& dims) const {
  for (const auto& traj : trajectories) {
    if (static_cast<int>(traj.steps.size()) != dims.horizon) {
      throw BadDimension("trajectory must have exactly H steps");
    }
    if (traj.policy_id < 0 || traj.policy_id >= static_cast<int>(policies.size())) {
      throw BadDimension("trajectory policy id does not resolve");
    }
  }
}

Trajectory sample_trajectory(const MarkovGame& game, const LeaderPolicy& policy,
                             const FollowerSolution& response, std::uint64_t seed) {
  const GameDims& d = game.dims();
  if (response.dims != d || policy.dims() != d) {
    throw ResponseMismatch("response/policy dimensions do not match the game");
  }
  auto rng = make_engine(seed, 0x74726a65ull);
  Trajectory traj;
  traj.steps.reserve(d.horizon);
  int s = sample_index(game.init_dist(), rng);
  for (int h = 0; h < d.horizon; ++h) {
    int b = sample_index(response.Nu[h].row(s), rng);
    int a = sample_index(policy.at(h, s).row(b), rng);
    TrajStep step;
    step.s = s;
    step.a = a;
    step.b = b;
    step.u = game.u(h, s, a, b);
    traj.steps.push_back(step);
    if (h + 1 < d.horizon) {
      Eigen::VectorXd row(d.num_states);
      for (int s2 = 0; s2 < d.num_states; ++s2) row[s2] = game.p(h, s, a, b, s2);
      s = sample_index(row, rng);
    }
  }
  return traj;
}

}  // namespace qse
