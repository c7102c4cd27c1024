#include "qse/game.hpp"

#include <cmath>
#include <random>

#include "qse/rng.hpp"

namespace qse {

namespace {
constexpr double kRowTol = 1e-12;

void check_dims(const GameDims& d) {
  if (d.num_states <= 0 || d.num_leader_actions <= 0 ||
      d.num_follower_actions <= 0 || d.horizon <= 0) {
    throw BadDimension("game dimensions must be positive");
  }
}
}  // namespace

double effective_horizon(double gamma, int h) {
  if (gamma == 1.0) return static_cast<double>(h);
  return (1.0 - std::pow(gamma, h)) / (1.0 - gamma);
}

LeaderPolicy::LeaderPolicy(const GameDims& dims, std::vector<Prescription> prescriptions)
    : dims_(dims), prescriptions_(std::move(prescriptions)) {
  if (static_cast<int>(prescriptions_.size()) != dims_.horizon * dims_.num_states) {
    throw BadDimension("policy needs one prescription per (h, s)");
  }
}

LeaderPolicy LeaderPolicy::uniform(const GameDims& dims) {
  Prescription unif = Prescription::Constant(
      dims.num_follower_actions, dims.num_leader_actions,
      1.0 / dims.num_leader_actions);
  return LeaderPolicy(dims, std::vector<Prescription>(
                               static_cast<std::size_t>(dims.horizon) * dims.num_states,
                               unif));
}

void LeaderPolicy::validate() const {
  for (const auto& alpha : prescriptions_) {
    if (alpha.rows() != dims_.num_follower_actions ||
        alpha.cols() != dims_.num_leader_actions) {
      throw BadDimension("prescription shape mismatch");
    }
    for (int b = 0; b < alpha.rows(); ++b) {
      if (alpha.row(b).minCoeff() < 0.0 ||
          std::abs(alpha.row(b).sum() - 1.0) > kRowTol) {
        throw NonStochasticRow("prescription row fails normalization");
      }
    }
  }
}

double IdentificationConstraint::kappa() const {
  double dot_one = weight.sum();
  return weight.cwiseAbs().maxCoeff() / std::abs(dot_one);
}

void IdentificationConstraint::validate() const {
  if (weight.size() == 0) throw BadDimension("constraint weight is empty");
  if (std::abs(weight.sum()) < 1e-12) {
    throw InfeasibleConstraint("<x, 1> must be nonzero");
  }
}

MarkovGame::MarkovGame(GameDims dims, Eigen::VectorXd init_dist,
                       std::vector<double> leader_reward,
                       std::vector<double> follower_reward,
                       std::vector<double> transition, double discount,
                       double rationality)
    : dims_(dims),
      init_dist_(std::move(init_dist)),
      leader_reward_(std::move(leader_reward)),
      follower_reward_(std::move(follower_reward)),
      transition_(std::move(transition)),
      discount_(discount),
      rationality_(rationality) {}

void MarkovGame::validate() const {
  check_dims(dims_);
  const std::size_t joint = static_cast<std::size_t>(dims_.horizon) * dims_.joint();
  if (leader_reward_.size() != joint || follower_reward_.size() != joint ||
      transition_.size() != joint * dims_.num_states ||
      init_dist_.size() != dims_.num_states) {
    throw BadDimension("game arrays are not shape-consistent");
  }
  if (rationality_ <= 0.0) throw BadDimension("eta must be positive");
  if (discount_ < 0.0 || discount_ > 1.0) throw BadDimension("gamma must lie in [0, 1]");
  if (init_dist_.minCoeff() < 0.0 || std::abs(init_dist_.sum() - 1.0) > kRowTol) {
    throw NonStochasticRow("rho0 fails normalization");
  }
  for (double v : leader_reward_) {
    if (v < 0.0 || v > 1.0 || !std::isfinite(v)) {
      throw RewardOutOfRange("leader reward outside [0, 1]");
    }
  }
  for (double v : follower_reward_) {
    if (v < 0.0 || v > 1.0 || !std::isfinite(v)) {
      throw RewardOutOfRange("follower reward outside [0, 1]");
    }
  }
  const int S = dims_.num_states;
  for (std::size_t row = 0; row < joint; ++row) {
    double sum = 0.0, mn = 0.0;
    for (int s2 = 0; s2 < S; ++s2) {
      double v = transition_[row * S + s2];
      sum += v;
      mn = std::min(mn, v);
    }
    if (mn < 0.0 || std::abs(sum - 1.0) > kRowTol) {
      throw NonStochasticRow("transition row fails normalization");
    }
  }
}

MarkovGame build_tabular_game(GameDims dims, Eigen::VectorXd init_dist,
                              std::vector<double> leader_reward,
                              std::vector<double> follower_reward,
                              std::vector<double> transition, double discount,
                              double rationality) {
  MarkovGame g(dims, std::move(init_dist), std::move(leader_reward),
               std::move(follower_reward), std::move(transition), discount,
               rationality);
  g.validate();
  return g;
}

namespace {

// Projects r (one (s,a) slice over b) onto {<x, r> = level}, then clips to
// [0, 1], alternating until both hold.
void project_constraint(Eigen::VectorXd& r, const IdentificationConstraint& c) {
  const double xnorm2 = c.weight.squaredNorm();
  for (int round = 0; round < 200; ++round) {
    double gap = c.weight.dot(r) - c.level;
    if (std::abs(gap) <= 1e-11 && r.minCoeff() >= 0.0 && r.maxCoeff() <= 1.0) {
      return;
    }
    r -= (gap / xnorm2) * c.weight;
    r = r.cwiseMax(0.0).cwiseMin(1.0);
  }
  throw InfeasibleConstraint("constraint projection did not converge");
}

}  // namespace

MarkovGame make_random_game(GameDims dims, double discount, double rationality,
                            std::uint64_t seed,
                            const std::optional<IdentificationConstraint>& constraint) {
  check_dims(dims);
  auto rng = make_engine(seed, 0x67616d65ull);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  const int S = dims.num_states, A = dims.num_leader_actions,
            B = dims.num_follower_actions, H = dims.horizon;
  const std::size_t joint = static_cast<std::size_t>(H) * dims.joint();

  Eigen::VectorXd rho0(S);
  for (int s = 0; s < S; ++s) rho0[s] = expo(rng);
  rho0 /= rho0.sum();

  std::vector<double> u(joint), r(joint), P(joint * S);
  for (auto& v : u) v = unif(rng);
  for (auto& v : r) v = unif(rng);
  for (std::size_t row = 0; row < joint; ++row) {
    double sum = 0.0;
    for (int s2 = 0; s2 < S; ++s2) {
      P[row * S + s2] = expo(rng);
      sum += P[row * S + s2];
    }
    for (int s2 = 0; s2 < S; ++s2) P[row * S + s2] /= sum;
  }

  if (constraint) {
    constraint->validate();
    if (constraint->weight.size() != B) {
      throw BadDimension("constraint weight must have |B| entries");
    }
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          Eigen::VectorXd slice(B);
          std::size_t base = ((static_cast<std::size_t>(h) * S + s) * A + a) * B;
          for (int b = 0; b < B; ++b) slice[b] = r[base + b];
          project_constraint(slice, *constraint);
          for (int b = 0; b < B; ++b) r[base + b] = slice[b];
        }
      }
    }
  }

  return build_tabular_game(dims, rho0, std::move(u), std::move(r), std::move(P),
                            discount, rationality);
}

}  // namespace qse
