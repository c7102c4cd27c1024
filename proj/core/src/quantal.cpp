#include "qse/quantal.hpp"

#include <cmath>

namespace qse {

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
  double m = x.maxCoeff();
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) acc += std::exp(x[i] - m);
  return m + std::log(acc);
}

double advantage_bound(double gamma, double eta, int num_follower_actions,
                       int horizon) {
  return (1.0 + effective_horizon(gamma, horizon)) *
         (std::log(static_cast<double>(num_follower_actions)) / eta + 1.0);
}

double advantage_bound(const MarkovGame& game) {
  return advantage_bound(game.discount(), game.rationality(),
                         game.dims().num_follower_actions, game.dims().horizon);
}

namespace {

FollowerSolution solve(const GameDims& d, double gamma, double eta,
                       const std::vector<double>& r, const std::vector<double>& P,
                       const LeaderPolicy& policy, double b_a) {
  if (policy.dims() != d) throw DimensionMismatch("policy does not match model dims");
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions,
            H = d.horizon;
  FollowerSolution sol;
  sol.dims = d;
  sol.gamma = gamma;
  sol.eta = eta;
  sol.advantage_bound = b_a;
  sol.Q.assign(H, Eigen::MatrixXd::Zero(S, B));
  sol.V.assign(H, Eigen::VectorXd::Zero(S));
  sol.Adv.assign(H, Eigen::MatrixXd::Zero(S, B));
  sol.Nu.assign(H, Eigen::MatrixXd::Zero(S, B));

  Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
  for (int h = H - 1; h >= 0; --h) {
    auto& Q = sol.Q[h];
    for (int s = 0; s < S; ++s) {
      const Prescription& alpha = policy.at(h, s);
      for (int b = 0; b < B; ++b) {
        double q = 0.0;
        for (int a = 0; a < A; ++a) {
          double pa = alpha(b, a);
          if (pa == 0.0) continue;
          std::size_t base = ((static_cast<std::size_t>(h) * S + s) * A + a) * B + b;
          double val = r[base];
          if (gamma > 0.0) {
            double cont = 0.0;
            for (int s2 = 0; s2 < S; ++s2) cont += P[base * S + s2] * v_next[s2];
            val += gamma * cont;
          }
          q += pa * val;
        }
        Q(s, b) = q;
      }
      // max-subtracted log-sum-exp; eta can be as large as 1e3
      double v = log_sum_exp((eta * Q.row(s)).transpose()) / eta;
      sol.V[h][s] = v;
      for (int b = 0; b < B; ++b) {
        sol.Adv[h](s, b) = Q(s, b) - v;
        sol.Nu[h](s, b) = std::exp(eta * (Q(s, b) - v));
      }
      double mass = sol.Nu[h].row(s).sum();
      sol.Nu[h].row(s) /= mass;
    }
    v_next = sol.V[h];
  }
  return sol;
}

}  // namespace

FollowerSolution quantal_response(const MarkovGame& game, const LeaderPolicy& policy) {
  return solve(game.dims(), game.discount(), game.rationality(),
               game.follower_reward(), game.transition(), policy,
               advantage_bound(game));
}

FollowerSolution quantal_response_model(const GameDims& dims, double gamma,
                                        double eta,
                                        const std::vector<double>& follower_reward,
                                        const std::vector<double>& transition,
                                        const LeaderPolicy& policy) {
  if (follower_reward.size() !=
      static_cast<std::size_t>(dims.horizon) * dims.joint()) {
    throw DimensionMismatch("reward table does not match dims");
  }
  return solve(dims, gamma, eta, follower_reward, transition, policy,
               advantage_bound(gamma, eta, dims.num_follower_actions, dims.horizon));
}

Eigen::VectorXd myopic_response(const Eigen::MatrixXd& reward_ab,
                                const Prescription& alpha, double eta) {
  const int B = static_cast<int>(reward_ab.cols());
  Eigen::VectorXd logits(B);
  for (int b = 0; b < B; ++b) {
    logits[b] = eta * alpha.row(b).dot(reward_ab.col(b));
  }
  double lse = log_sum_exp(logits);
  return (logits.array() - lse).exp();
}

DistReport dist_metrics(const Eigen::Ref<const Eigen::VectorXd>& p,
                        const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (p.size() != q.size()) throw DimensionMismatch("distributions differ in support size");
  DistReport rep;
  double h2 = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    rep.tv += std::abs(p[i] - q[i]);
    double ds = std::sqrt(p[i]) - std::sqrt(q[i]);
    h2 += ds * ds;
    if (p[i] > 0.0) {
      if (q[i] <= 0.0) {
        throw SupportMismatch("KL undefined: q = 0 on the support of p");
      }
      rep.kl += p[i] * std::log(p[i] / q[i]);
    }
  }
  rep.tv *= 0.5;
  rep.hellinger = std::sqrt(0.5 * h2);
  rep.kl = std::max(rep.kl, 0.0);  // guard tiny negative rounding
  return rep;
}

}  // namespace qse
