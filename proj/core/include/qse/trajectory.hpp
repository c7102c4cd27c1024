#pragma once

#include <cstdint>
#include <vector>

#include "qse/game.hpp"
#include "qse/quantal_fwd.hpp"

namespace qse {

struct TrajStep {
  int s = 0;
  int a = 0;
  int b = 0;
  double u = 0.0;
};

struct Trajectory {
  std::vector<TrajStep> steps;  // exactly H entries
  int policy_id = -1;           // resolves into Dataset::policies
};

// Offline/online dataset: trajectories plus the announced policies they were
// collected under.
struct Dataset {
  std::vector<Trajectory> trajectories;
  std::vector<LeaderPolicy> policies;

  int size() const { return static_cast<int>(trajectories.size()); }
  const LeaderPolicy& policy_of(const Trajectory& t) const {
    return policies[t.policy_id];
  }
  void append(Trajectory traj, LeaderPolicy policy);
  void validate(const GameDims& dims) const;
};

// Samples one episode under (policy, response). The response must have been
// computed for this (game, policy) pair; identical seeds give identical
// trajectories.
Trajectory sample_trajectory(const MarkovGame& game, const LeaderPolicy& policy,
                             const FollowerSolution& response,
                             std::uint64_t seed);

}  // namespace qse
