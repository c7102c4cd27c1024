#include "qse/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qse/rng.hpp"

namespace qse {

OnlineEnv::OnlineEnv(MarkovGame game, LinearGameParams params, std::uint64_t seed)
    : dims_(game.dims()),
      eta_(game.rationality()),
      gamma_(game.discount()),
      init_dist_(game.init_dist()),
      params_(std::move(params)),
      game_(std::move(game)),
      seed_(seed) {}

Trajectory OnlineEnv::announce(const LeaderPolicy& policy) {
  FollowerSolution response = quantal_response(game_, policy);
  Trajectory traj =
      sample_trajectory(game_, policy, response, derive_seed(seed_, episode_));
  ++episode_;
  return traj;
}

namespace {

Eigen::MatrixXd reward_table_at(const LinearGameParams& params, const GameDims& dims,
                                int h, int s, const Eigen::VectorXd& theta) {
  const int A = dims.num_leader_actions, B = dims.num_follower_actions;
  Eigen::MatrixXd table(A, B);
  for (int a = 0; a < A; ++a) {
    for (int b = 0; b < B; ++b) {
      table(a, b) = params.phi[h].row((s * A + a) * B + b).dot(theta);
    }
  }
  return table;
}

Eigen::MatrixXd policy_features_at(const LinearGameParams& params, const GameDims& dims,
                                   int h, int s, const Prescription& alpha) {
  const int A = dims.num_leader_actions, B = dims.num_follower_actions;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(B, params.dim);
  for (int b = 0; b < B; ++b) {
    for (int a = 0; a < A; ++a) {
      if (alpha(b, a) == 0.0) continue;
      phi.row(b) += alpha(b, a) * params.phi[h].row((s * A + a) * B + b);
    }
  }
  return phi;
}

void push_row(RegretTrace& trace, int t, double J_pi, double J_star) {
  double subopt = J_star - J_pi;
  double cum = trace.rows.empty() ? 0.0 : trace.rows.back().cum_regret;
  trace.rows.push_back(RegretRow{t, J_pi, subopt, cum + subopt});
}

}  // namespace

RegretTrace mle_ovi(OnlineEnv& env, int T, Scheme scheme, const LearnerParams& lp,
                    const PrescriptionGrid& grid, std::uint64_t seed,
                    const ExactEvaluator& exact_J, double J_star) {
  if (scheme != Scheme::S4 && scheme != Scheme::S5) {
    throw ConfigError("mle_ovi supports S4/S5");
  }
  const GameDims& dims = env.dims();
  const LinearGameParams& params = env.features();
  const int S = dims.num_states, A = dims.num_leader_actions,
            B = dims.num_follower_actions, H = dims.horizon;
  const double eta = env.eta();
  const double b_a = advantage_bound(0.0, eta, B, H);
  const double ceta = c_eta_constant(eta, b_a);

  RegretTrace trace;
  trace.J_star = J_star;
  std::vector<Eigen::VectorXd> warm(H, Eigen::VectorXd::Zero(params.dim));
  for (int t = 1; t <= T; ++t) {
    double beta = lp.beta > 0.0
                      ? lp.beta
                      : default_beta_linear(params.dim, H, eta, T, lp.delta, lp.c_beta);
    std::vector<Prescription> chosen(static_cast<std::size_t>(H) * S);
    Eigen::VectorXd w_next = Eigen::VectorXd::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
      RidgeResult ridge = ridge_and_gamma1(trace.data, params, dims, h, w_next,
                                           lp.c1, lp.delta);
      // online bonus uses the episode budget T inside the log
      ridge.gamma1_coef = lp.c1 * params.dim * H *
          std::sqrt(std::log(2.0 * params.dim * H * static_cast<double>(T) *
                             static_cast<double>(std::max(T, 2)) / lp.delta));
      Eigen::MatrixXd lambda_inv = ridge.Lambda.inverse();

      bool have_data = trace.data.size() > 0;
      ChoiceData slice;
      ConfidenceSet cset;
      if (!lp.pinned_theta.empty()) {
        if (have_data) slice = choice_slice(trace.data, params, dims, h, eta);
        cset.center = lp.pinned_theta[h];
        cset.sample = {cset.center};
      } else if (have_data) {
        slice = choice_slice(trace.data, params, dims, h, eta);
        int want = scheme == Scheme::S5 ? 1 : lp.sample_size;
        cset = confidence_set(slice, beta, want, lp.param_bound, ceta,
                              derive_seed(seed, 7000 + 31 * t + h), &warm[h]);
        warm[h] = cset.center;
      } else {
        cset.center = Eigen::VectorXd::Zero(params.dim);
        cset.sample = {cset.center};
      }

      const std::vector<Eigen::VectorXd>& sample =
          (scheme == Scheme::S5) ? std::vector<Eigen::VectorXd>{cset.center}
                                 : cset.sample;
      // Sigma_{h,t} at each candidate (unnormalized over history) + I
      std::vector<Eigen::MatrixXd> psis(sample.size());
      for (std::size_t k = 0; k < sample.size(); ++k) {
        Eigen::MatrixXd sig = have_data
                                  ? covariance_data(sample[k], slice, false)
                                  : Eigen::MatrixXd::Zero(params.dim, params.dim);
        psis[k] = sig + Eigen::MatrixXd::Identity(params.dim, params.dim);
      }

      const double cap = static_cast<double>(H - h);
      std::vector<double> U_hat(static_cast<std::size_t>(dims.joint()));
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          for (int b = 0; b < B; ++b) {
            int row = (s * A + a) * B + b;
            Eigen::VectorXd phi = params.phi[h].row(row).transpose();
            double bonus = ridge.gamma1_coef *
                           std::sqrt(std::max(0.0, phi.dot(lambda_inv * phi)));
            U_hat[row] = std::clamp(phi.dot(ridge.omega) + bonus, 0.0, cap);
          }
        }
      }
      Eigen::VectorXd w_cur(S);
      for (int s = 0; s < S; ++s) {
        Eigen::MatrixXd value(A, B);
        for (int a = 0; a < A; ++a) {
          for (int b = 0; b < B; ++b) value(a, b) = U_hat[(s * A + a) * B + b];
        }
        std::vector<Eigen::MatrixXd> tables(sample.size());
        for (std::size_t k = 0; k < sample.size(); ++k) {
          tables[k] = reward_table_at(params, dims, h, s, sample[k]);
        }
        std::function<double(const Prescription&, int)> adjust;
        if (scheme == Scheme::S5) {
          adjust = [&](const Prescription& alpha, int k) {
            Eigen::MatrixXd phi_alpha = policy_features_at(params, dims, h, s, alpha);
            Eigen::MatrixXd sigma_state = covariance_state(sample[k], phi_alpha, eta);
            return gamma2_penalty(sigma_state, psis[k], beta, eta, b_a,
                                  lp.param_bound, static_cast<double>(H));
          };
        }
        ArgmaxResult res =
            prescription_argmax(value, tables, eta, InnerAggregate::Max, grid, adjust);
        w_cur[s] = res.value;
        chosen[h * S + s] = res.prescription;
      }
      w_next = w_cur;
    }
    LeaderPolicy policy(dims, std::move(chosen));
    trace.optimistic_values.push_back(env.init_dist().dot(w_next));
    Trajectory traj = env.announce(policy);
    trace.data.append(std::move(traj), policy);
    trace.announced.push_back(policy);
    push_row(trace, t, exact_J(policy), J_star);
  }
  return trace;
}

double bellman_loss_online(const UTuple& U, int h, const ThetaTuple& theta,
                           const Dataset& data, const LinearGameParams& params,
                           const GameDims& dims, double eta,
                           const PrescriptionGrid& grid) {
  const int A = dims.num_leader_actions, B = dims.num_follower_actions;
  double loss = 0.0;
  for (const auto& traj : data.trajectories) {
    const TrajStep& step = traj.steps[h];
    double target = step.u;
    if (h + 1 < dims.horizon) {
      int s2 = traj.steps[h + 1].s;
      Eigen::MatrixXd value(A, B);
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) value(a, b) = U.U[h + 1][(s2 * A + a) * B + b];
      }
      Eigen::MatrixXd table = reward_table_at(params, dims, h + 1, s2,
                                              theta.theta[h + 1]);
      ArgmaxResult res = prescription_argmax(value, {table}, eta,
                                             InnerAggregate::Max, grid);
      target += res.value;
    }
    double pred = U.U[h][(step.s * A + step.a) * B + step.b];
    loss += (pred - target) * (pred - target);
  }
  return loss;
}

RegretTrace mle_golf(OnlineEnv& env, int T, const std::vector<UTuple>& U_class,
                     const std::vector<ThetaTuple>& theta_class, double beta,
                     const PrescriptionGrid& grid, std::uint64_t seed,
                     const ExactEvaluator& exact_J, double J_star,
                     int truth_theta_index, int truth_U_index) {
  (void)seed;
  if (U_class.empty() || theta_class.empty()) {
    throw EmptyData("mle_golf needs nonempty classes");
  }
  const GameDims& dims = env.dims();
  const LinearGameParams& params = env.features();
  const int A = dims.num_leader_actions, B = dims.num_follower_actions,
            H = dims.horizon, S = dims.num_states;
  const double eta = env.eta();

  RegretTrace trace;
  trace.J_star = J_star;
  for (int t = 1; t <= T; ++t) {
    bool have_data = trace.data.size() > 0;
    // MLE sublevel test per h
    std::vector<std::vector<double>> nll(theta_class.size(), std::vector<double>(H, 0.0));
    std::vector<double> min_nll(H, 0.0);
    if (have_data) {
      for (int h = 0; h < H; ++h) {
        ChoiceData slice = choice_slice(trace.data, params, dims, h, eta);
        double mn = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < theta_class.size(); ++k) {
          nll[k][h] = nll_myopic(theta_class[k].theta[h], slice);
          mn = std::min(mn, nll[k][h]);
        }
        min_nll[h] = mn;
      }
    }
    auto theta_ok = [&](std::size_t k) {
      if (!have_data) return true;
      for (int h = 0; h < H; ++h) {
        if (nll[k][h] - min_nll[h] > beta) return false;
      }
      return true;
    };
    // GOLF loss sublevel test per h for each (U, theta) pair
    auto pair_ok = [&](std::size_t uk, std::size_t tk) {
      if (!have_data) return true;
      for (int h = 0; h < H; ++h) {
        double loss = bellman_loss_online(U_class[uk], h, theta_class[tk], trace.data,
                                          params, dims, eta, grid);
        double inf_loss = std::numeric_limits<double>::infinity();
        for (std::size_t uk2 = 0; uk2 < U_class.size(); ++uk2) {
          UTuple swapped = U_class[uk];
          swapped.U[h] = U_class[uk2].U[h];
          inf_loss = std::min(inf_loss,
                              bellman_loss_online(swapped, h, theta_class[tk],
                                                  trace.data, params, dims, eta, grid));
        }
        if (loss - inf_loss > static_cast<double>(H) * static_cast<double>(H) * beta) {
          return false;
        }
      }
      return true;
    };

    double best = -std::numeric_limits<double>::infinity();
    int best_u = -1, best_t = -1;
    bool truth_in = true;
    for (std::size_t tk = 0; tk < theta_class.size(); ++tk) {
      bool tok = theta_ok(tk);
      for (std::size_t uk = 0; uk < U_class.size(); ++uk) {
        bool in_set = tok && pair_ok(uk, tk);
        if (truth_theta_index == static_cast<int>(tk) &&
            truth_U_index == static_cast<int>(uk)) {
          truth_in = in_set;
        }
        if (!in_set) continue;
        double value = 0.0;
        for (int s = 0; s < S; ++s) {
          if (env.init_dist()[s] == 0.0) continue;
          Eigen::MatrixXd vtab(A, B);
          for (int a = 0; a < A; ++a) {
            for (int b = 0; b < B; ++b) {
              vtab(a, b) = U_class[uk].U[0][(s * A + a) * B + b];
            }
          }
          Eigen::MatrixXd rtab = reward_table_at(params, dims, 0, s,
                                                 theta_class[tk].theta[0]);
          ArgmaxResult res = prescription_argmax(vtab, {rtab}, eta,
                                                 InnerAggregate::Max, grid);
          value += env.init_dist()[s] * res.value;
        }
        if (value > best) {
          best = value;
          best_u = static_cast<int>(uk);
          best_t = static_cast<int>(tk);
        }
      }
    }
    if (best_u < 0) {
      throw EmptyConfidenceSet(
          "mle_golf: joint confidence set empty; beta below the realizable threshold");
    }
    trace.truth_in_confidence.push_back(truth_in ? 1 : 0);
    trace.optimistic_values.push_back(best);

    // greedy policy from the optimistic pair
    std::vector<Prescription> chosen(static_cast<std::size_t>(H) * S);
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        Eigen::MatrixXd vtab(A, B);
        for (int a = 0; a < A; ++a) {
          for (int b = 0; b < B; ++b) {
            vtab(a, b) = U_class[best_u].U[h][(s * A + a) * B + b];
          }
        }
        Eigen::MatrixXd rtab = reward_table_at(params, dims, h, s,
                                               theta_class[best_t].theta[h]);
        ArgmaxResult res = prescription_argmax(vtab, {rtab}, eta,
                                               InnerAggregate::Max, grid);
        chosen[h * S + s] = res.prescription;
      }
    }
    LeaderPolicy policy(dims, std::move(chosen));
    Trajectory traj = env.announce(policy);
    trace.data.append(std::move(traj), policy);
    trace.announced.push_back(policy);
    push_row(trace, t, exact_J(policy), J_star);
  }
  return trace;
}

RegretTrace omle_farsighted(OnlineEnv& env, int T,
                            const std::vector<MarkovGame>& model_class,
                            const std::vector<LeaderPolicy>& policy_class,
                            double beta, std::uint64_t seed,
                            const ExactEvaluator& exact_J, double J_star,
                            int truth_model_index) {
  (void)seed;
  if (model_class.empty() || policy_class.empty()) {
    throw EmptyData("omle needs nonempty classes");
  }
  const int H = env.dims().horizon;

  // J(pi, M) never changes; precompute the table
  std::vector<std::vector<double>> J_table(policy_class.size(),
                                           std::vector<double>(model_class.size()));
  for (std::size_t p = 0; p < policy_class.size(); ++p) {
    for (std::size_t m = 0; m < model_class.size(); ++m) {
      J_table[p][m] = evaluate_J_model(model_class[m], policy_class[p]);
    }
  }

  RegretTrace trace;
  trace.J_star = J_star;
  // generalized NLL accumulates episode by episode
  std::vector<std::vector<double>> nll(model_class.size(), std::vector<double>(H, 0.0));
  for (int t = 1; t <= T; ++t) {
    std::vector<double> min_nll(H, std::numeric_limits<double>::infinity());
    for (std::size_t m = 0; m < model_class.size(); ++m) {
      for (int h = 0; h < H; ++h) min_nll[h] = std::min(min_nll[h], nll[m][h]);
    }
    std::vector<int> members;
    bool truth_in = false;
    for (std::size_t m = 0; m < model_class.size(); ++m) {
      bool ok = true;
      for (int h = 0; h < H && ok; ++h) {
        if (!(nll[m][h] - min_nll[h] <= beta)) ok = false;
      }
      if (ok) {
        members.push_back(static_cast<int>(m));
        if (truth_model_index == static_cast<int>(m)) truth_in = true;
      }
    }
    if (members.empty()) throw EmptyModelSet("omle confidence set is empty");
    trace.truth_in_confidence.push_back(truth_in ? 1 : 0);

    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_p = 0;
    for (std::size_t p = 0; p < policy_class.size(); ++p) {
      for (int m : members) {
        if (J_table[p][m] > best) {
          best = J_table[p][m];
          best_p = p;
        }
      }
    }
    trace.optimistic_values.push_back(best);
    const LeaderPolicy& policy = policy_class[best_p];
    Trajectory traj = env.announce(policy);

    // fold the new episode into each model's running NLL
    Dataset episode;
    episode.append(traj, policy);
    for (std::size_t m = 0; m < model_class.size(); ++m) {
      std::vector<double> inc = nll_farsighted(model_class[m], episode);
      for (int h = 0; h < H; ++h) nll[m][h] += inc[h];
    }
    trace.data.append(std::move(traj), policy);
    trace.announced.push_back(policy);
    push_row(trace, t, exact_J(policy), J_star);
  }
  return trace;
}

}  // namespace qse
