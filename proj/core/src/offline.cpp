#include "qse/offline.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "qse/rng.hpp"

namespace qse {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::S1: return "S1";
    case Scheme::S2: return "S2";
    case Scheme::S3: return "S3";
    case Scheme::S4: return "S4";
    case Scheme::S5: return "S5";
  }
  return "S3";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "S1" || name == "s1") return Scheme::S1;
  if (name == "S2" || name == "s2") return Scheme::S2;
  if (name == "S3" || name == "s3") return Scheme::S3;
  if (name == "S4" || name == "s4") return Scheme::S4;
  if (name == "S5" || name == "s5") return Scheme::S5;
  throw ConfigError("unknown scheme: " + name);
}

RidgeResult ridge_and_gamma1(const Dataset& data, const LinearGameParams& params,
                             const GameDims& dims, int h,
                             const Eigen::VectorXd& W_next, double c1,
                             double delta) {
  const int d = params.dim;
  const int A = dims.num_leader_actions, B = dims.num_follower_actions;
  RidgeResult res;
  res.Lambda = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(d);
  for (const auto& traj : data.trajectories) {
    const TrajStep& step = traj.steps[h];
    int row = (step.s * A + step.a) * B + step.b;
    Eigen::VectorXd phi = params.phi[h].row(row).transpose();
    res.Lambda += phi * phi.transpose();
    double y = step.u;
    if (h + 1 < dims.horizon && W_next.size() == dims.num_states) {
      y += W_next[traj.steps[h + 1].s];
    }
    target += phi * y;
  }
  res.omega = res.Lambda.ldlt().solve(target);
  const double T = std::max<double>(1.0, data.size());
  res.gamma1_coef =
      c1 * d * dims.horizon * std::sqrt(std::log(2.0 * d * dims.horizon * T / delta));
  return res;
}

double c3_constant(double eta, double advantage_bound) {
  double e2 = std::exp(2.0 * eta * advantage_bound);
  return eta * eta * e2 * (2.0 + eta * advantage_bound * e2) / 2.0;
}

double c_eta_constant(double eta, double advantage_bound) {
  return 1.0 / eta + advantage_bound;
}

double gamma2_penalty(const Eigen::MatrixXd& Sigma_state, const Eigen::MatrixXd& Psi,
                      double beta, double eta, double advantage_bound,
                      double param_bound, double B_U) {
  double ceta = c_eta_constant(eta, advantage_bound);
  double tr = trace_pinv_product(Psi, Sigma_state);
  tr = std::max(tr, 0.0);
  double xi = std::sqrt(tr) *
              std::sqrt(8.0 * ceta * ceta * beta + 4.0 * param_bound * param_bound);
  return 2.0 * B_U * (eta * xi + c3_constant(eta, advantage_bound) * xi * xi);
}

namespace {

// A x B table of <phi(s,a,b), theta> at a fixed (h, s).
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

// Feature rows phi^alpha(s, b) for a prescription at (h, s): B x d.
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

}  // namespace

PessimisticEstimate mle_pvi(const Dataset& data, const LinearGameParams& params,
                            const GameDims& dims, const Eigen::VectorXd& init_dist,
                            double eta, Scheme scheme, const LearnerParams& lp,
                            const PrescriptionGrid& grid, std::uint64_t seed) {
  if (scheme != Scheme::S1 && scheme != Scheme::S2 && scheme != Scheme::S3) {
    throw ConfigError("mle_pvi supports S1/S2/S3");
  }
  const int S = dims.num_states, A = dims.num_leader_actions,
            B = dims.num_follower_actions, H = dims.horizon;
  const int T = data.size();
  const double b_a = advantage_bound(0.0, eta, B, H);
  const double ceta = c_eta_constant(eta, b_a);
  double beta = lp.beta > 0.0
                    ? lp.beta
                    : default_beta_linear(params.dim, H, eta, T, lp.delta, lp.c_beta);

  PessimisticEstimate est;
  est.scheme = scheme;
  est.beta = beta;
  est.U_hat.assign(H, std::vector<double>(static_cast<std::size_t>(dims.joint()), 0.0));
  est.W_hat.assign(H, Eigen::VectorXd::Zero(S));
  est.omega.resize(H);
  est.Lambda.resize(H);
  est.theta_mle.resize(H);

  std::vector<Prescription> chosen(static_cast<std::size_t>(H) * S);
  Eigen::VectorXd w_next = Eigen::VectorXd::Zero(S);
  for (int h = H - 1; h >= 0; --h) {
    RidgeResult ridge = ridge_and_gamma1(data, params, dims, h, w_next, lp.c1, lp.delta);
    est.omega[h] = ridge.omega;
    est.Lambda[h] = ridge.Lambda;
    Eigen::MatrixXd lambda_inv = ridge.Lambda.inverse();

    ChoiceData slice;
    ConfidenceSet cset;
    bool have_data = T > 0;
    if (have_data) {
      slice = choice_slice(data, params, dims, h, eta);
      int want = scheme == Scheme::S3 ? 1 : lp.sample_size;
      cset = confidence_set(slice, beta, want, lp.param_bound, ceta,
                            derive_seed(seed, 101 + h));
      est.theta_mle[h] = cset.center;
    } else {
      est.theta_mle[h] = Eigen::VectorXd::Zero(params.dim);
      cset.center = est.theta_mle[h];
      cset.sample = {est.theta_mle[h]};
    }
    Eigen::MatrixXd sigma_data = have_data
                                     ? covariance_data(cset.center, slice, true)
                                     : Eigen::MatrixXd::Zero(params.dim, params.dim);

    // truncated pessimistic U
    const double cap = static_cast<double>(H - h);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) {
          int row = (s * A + a) * B + b;
          Eigen::VectorXd phi = params.phi[h].row(row).transpose();
          double bonus = ridge.gamma1_coef * std::sqrt(
              std::max(0.0, phi.dot(lambda_inv * phi)));
          double val = phi.dot(ridge.omega) - bonus;
          est.U_hat[h][row] = std::clamp(val, 0.0, cap);
        }
      }
    }

    const std::vector<Eigen::VectorXd>& sample =
        (scheme == Scheme::S3) ? std::vector<Eigen::VectorXd>{cset.center}
                               : cset.sample;
    // Psi per candidate theta: T * Sigma_{h,D}^theta + I; S3/S2 evaluate
    // Sigma at the candidate itself
    std::vector<Eigen::MatrixXd> psis(sample.size());
    for (std::size_t k = 0; k < sample.size(); ++k) {
      Eigen::MatrixXd sig =
          have_data ? covariance_data(sample[k], slice, true) : sigma_data;
      psis[k] = sig * static_cast<double>(T) +
                Eigen::MatrixXd::Identity(params.dim, params.dim);
    }

    for (int s = 0; s < S; ++s) {
      Eigen::MatrixXd value(A, B);
      for (int a = 0; a < A; ++a) {
        for (int b = 0; b < B; ++b) value(a, b) = est.U_hat[h][(s * A + a) * B + b];
      }
      std::vector<Eigen::MatrixXd> tables(sample.size());
      for (std::size_t k = 0; k < sample.size(); ++k) {
        tables[k] = reward_table_at(params, dims, h, s, sample[k]);
      }
      std::function<double(const Prescription&, int)> adjust;
      if (scheme == Scheme::S2 || scheme == Scheme::S3) {
        adjust = [&](const Prescription& alpha, int k) {
          Eigen::MatrixXd phi_alpha = policy_features_at(params, dims, h, s, alpha);
          Eigen::MatrixXd sigma_state =
              covariance_state(sample[k], phi_alpha, eta);
          return -gamma2_penalty(sigma_state, psis[k], beta, eta, b_a,
                                 lp.param_bound, static_cast<double>(H));
        };
      }
      InnerAggregate inner =
          (scheme == Scheme::S1) ? InnerAggregate::Min : InnerAggregate::Max;
      ArgmaxResult res = prescription_argmax(value, tables, eta, inner, grid, adjust);
      est.W_hat[h][s] = res.value;
      chosen[h * S + s] = res.prescription;
    }
    w_next = est.W_hat[h];
  }
  est.policy = LeaderPolicy(dims, std::move(chosen));
  est.W1_mean = init_dist.dot(est.W_hat[0]);
  return est;
}

double bellman_loss_offline(const UTuple& U, int h, const ThetaTuple& theta,
                            const LeaderPolicy& pi, const Dataset& data,
                            const LinearGameParams& params, const GameDims& dims,
                            double eta) {
  const int A = dims.num_leader_actions, B = dims.num_follower_actions;
  double loss = 0.0;
  for (const auto& traj : data.trajectories) {
    const TrajStep& step = traj.steps[h];
    double target = step.u;
    if (h + 1 < dims.horizon) {
      int s2 = traj.steps[h + 1].s;
      const Prescription& alpha = pi.at(h + 1, s2);
      Eigen::MatrixXd table = reward_table_at(params, dims, h + 1, s2, theta.theta[h + 1]);
      Eigen::VectorXd nu = myopic_response(table, alpha, eta);
      double cont = 0.0;
      for (int b = 0; b < B; ++b) {
        for (int a = 0; a < A; ++a) {
          cont += nu[b] * alpha(b, a) * U.U[h + 1][(s2 * A + a) * B + b];
        }
      }
      target += cont;
    }
    double pred = U.U[h][(step.s * A + step.a) * B + step.b];
    loss += (pred - target) * (pred - target);
  }
  return loss;
}

BcpResult mle_bcp(const Dataset& data, const std::vector<UTuple>& U_class,
                  const std::vector<ThetaTuple>& theta_class,
                  const std::vector<LeaderPolicy>& policy_class,
                  const LinearGameParams& params, const GameDims& dims,
                  const Eigen::VectorXd& init_dist, double eta, double beta) {
  if (U_class.empty() || theta_class.empty() || policy_class.empty()) {
    throw EmptyData("mle_bcp needs nonempty classes");
  }
  const int A = dims.num_leader_actions, B = dims.num_follower_actions, H = dims.horizon;

  // MLE sublevel gaps are policy-independent; compute once
  std::vector<std::vector<double>> nll(theta_class.size(),
                                       std::vector<double>(H, 0.0));
  std::vector<double> min_nll(H, std::numeric_limits<double>::infinity());
  for (int h = 0; h < H; ++h) {
    ChoiceData slice = choice_slice(data, params, dims, h, eta);
    for (std::size_t k = 0; k < theta_class.size(); ++k) {
      nll[k][h] = nll_myopic(theta_class[k].theta[h], slice);
      min_nll[h] = std::min(min_nll[h], nll[k][h]);
    }
  }
  auto theta_ok = [&](std::size_t k) {
    for (int h = 0; h < H; ++h) {
      if (nll[k][h] - min_nll[h] > beta) return false;
    }
    return true;
  };

  BcpResult out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < policy_class.size(); ++p) {
    const LeaderPolicy& pi = policy_class[p];
    // Bellman-loss gaps: for each (U, theta) pair and h, against the best
    // step-h slice from the class
    double pess = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t uk = 0; uk < U_class.size(); ++uk) {
      for (std::size_t tk = 0; tk < theta_class.size(); ++tk) {
        if (!theta_ok(tk)) continue;
        bool ok = true;
        for (int h = 0; h < H && ok; ++h) {
          double loss =
              bellman_loss_offline(U_class[uk], h, theta_class[tk], pi, data,
                                   params, dims, eta);
          double inf_loss = std::numeric_limits<double>::infinity();
          for (std::size_t uk2 = 0; uk2 < U_class.size(); ++uk2) {
            UTuple swapped = U_class[uk];  // inf over the step-h slice only
            swapped.U[h] = U_class[uk2].U[h];
            inf_loss = std::min(inf_loss,
                                bellman_loss_offline(swapped, h, theta_class[tk],
                                                     pi, data, params, dims, eta));
          }
          if (loss - inf_loss > static_cast<double>(H) * static_cast<double>(H) * beta) {
            ok = false;
          }
        }
        if (!ok) continue;
        any = true;
        // pessimistic initial value under (U, theta)
        double value = 0.0;
        for (int s = 0; s < dims.num_states; ++s) {
          if (init_dist[s] == 0.0) continue;
          const Prescription& alpha = pi.at(0, s);
          Eigen::MatrixXd table = reward_table_at(params, dims, 0, s,
                                                  theta_class[tk].theta[0]);
          Eigen::VectorXd nu = myopic_response(table, alpha, eta);
          double w = 0.0;
          for (int b = 0; b < B; ++b) {
            for (int a = 0; a < A; ++a) {
              w += nu[b] * alpha(b, a) * U_class[uk].U[0][(s * A + a) * B + b];
            }
          }
          value += init_dist[s] * w;
        }
        pess = std::min(pess, value);
      }
    }
    if (!any) {
      out.skipped_policies.push_back(static_cast<int>(p));
      std::cerr << "mle_bcp: empty confidence set for policy " << p
                << " (beta too small), skipping\n";
      continue;
    }
    if (pess > best) {
      best = pess;
      out.policy = pi;
      out.policy_index = static_cast<int>(p);
      out.pessimistic_value = pess;
    }
  }
  if (out.policy_index < 0) {
    throw EmptyConfidenceSet("every policy's confidence set came up empty");
  }
  return out;
}

PmleResult pmle_farsighted(const Dataset& data, const std::vector<MarkovGame>& model_class,
                           const std::vector<LeaderPolicy>& policy_class,
                           double beta) {
  if (model_class.empty() || policy_class.empty()) {
    throw EmptyData("pmle_farsighted needs nonempty classes");
  }
  if (data.trajectories.empty()) throw EmptyData("pmle_farsighted needs data");
  const int H = model_class.front().dims().horizon;

  std::vector<std::vector<double>> nll(model_class.size());
  std::vector<double> min_nll(H, std::numeric_limits<double>::infinity());
  for (std::size_t m = 0; m < model_class.size(); ++m) {
    nll[m] = nll_farsighted(model_class[m], data);
    for (int h = 0; h < H; ++h) min_nll[h] = std::min(min_nll[h], nll[m][h]);
  }
  PmleResult out;
  for (std::size_t m = 0; m < model_class.size(); ++m) {
    bool ok = true;
    for (int h = 0; h < H && ok; ++h) {
      if (!(nll[m][h] - min_nll[h] <= beta)) ok = false;
    }
    if (ok) out.confidence_members.push_back(static_cast<int>(m));
  }
  if (out.confidence_members.empty()) {
    throw EmptyModelSet("farsighted confidence set is empty at this beta");
  }

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < policy_class.size(); ++p) {
    double pess = std::numeric_limits<double>::infinity();
    int pess_model = -1;
    for (int m : out.confidence_members) {
      double value = evaluate_J_model(model_class[m], policy_class[p]);
      if (value < pess) {
        pess = value;
        pess_model = m;
      }
    }
    if (pess > best) {
      best = pess;
      out.policy = policy_class[p];
      out.policy_index = static_cast<int>(p);
      out.model_index = pess_model;
      out.pessimistic_value = pess;
    }
  }
  return out;
}

}  // namespace qse
