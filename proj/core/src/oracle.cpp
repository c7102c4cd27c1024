#include "qse/oracle.hpp"

#include <chrono>
#include <future>
#include <cmath>
#include <random>
#include <sstream>

#include "qse/harness.hpp"
#include "qse/offline.hpp"
#include "qse/rng.hpp"

namespace qse {

Occupancy state_occupancy(const MarkovGame& game, const LeaderPolicy& policy,
                          const FollowerSolution& response) {
  const GameDims& d = game.dims();
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions;
  Occupancy occ;
  occ.state.assign(d.horizon + 1, Eigen::VectorXd::Zero(S));
  occ.state[0] = game.init_dist();
  for (int h = 0; h < d.horizon; ++h) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
      double ds = occ.state[h][s];
      if (ds == 0.0) continue;
      for (int b = 0; b < B; ++b) {
        double wb = ds * response.Nu[h](s, b);
        if (wb == 0.0) continue;
        for (int a = 0; a < A; ++a) {
          double w = wb * policy.at(h, s)(b, a);
          if (w == 0.0) continue;
          for (int s2 = 0; s2 < S; ++s2) {
            next[s2] += w * game.p(h, s, a, b, s2);
          }
        }
      }
    }
    occ.state[h + 1] = next;
  }
  return occ;
}

double evaluate_energy(const MarkovGame& game, const LeaderPolicy& policy,
                       const std::vector<Eigen::MatrixXd>& nu) {
  const GameDims& d = game.dims();
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions;
  const double gamma = game.discount(), eta = game.rationality();
  Eigen::VectorXd dist = game.init_dist();
  double total = 0.0;
  double disc = 1.0;
  for (int h = 0; h < d.horizon; ++h) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
      double ds = dist[s];
      if (ds == 0.0) continue;
      double entropy = 0.0;
      for (int b = 0; b < B; ++b) {
        double p = nu[h](s, b);
        if (p > 0.0) entropy -= p * std::log(p);
      }
      total += disc * ds * entropy / eta;
      for (int b = 0; b < B; ++b) {
        double wb = ds * nu[h](s, b);
        if (wb == 0.0) continue;
        for (int a = 0; a < A; ++a) {
          double w = wb * policy.at(h, s)(b, a);
          if (w == 0.0) continue;
          total += disc * w * game.r(h, s, a, b);
          for (int s2 = 0; s2 < S; ++s2) next[s2] += w * game.p(h, s, a, b, s2);
        }
      }
    }
    dist = next;
    disc *= gamma;
  }
  return total;
}

namespace {

void simplex_mesh(int mesh, int k, std::vector<Eigen::VectorXd>& out) {
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(k);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == k - 1) {
      cur[pos] = remaining;
      out.push_back(cur / mesh);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      cur[pos] = v;
      rec(pos + 1, remaining - v);
    }
  };
  rec(0, mesh);
}

}  // namespace

double energy_improvement_by_grid(const MarkovGame& game, const LeaderPolicy& policy,
                                  const FollowerSolution& response, int mesh) {
  const GameDims& d = game.dims();
  const int B = d.num_follower_actions;
  const double eta = game.rationality();
  double base = evaluate_energy(game, policy, response.Nu);

  // Blockwise scan: G restricted to one (h, s) block is affine in the block
  // distribution plus an entropy term,
  //   g(nu') = c0 + <w, nu'> + reach / eta * H(nu').
  // Recover (c0, w, reach) from |B| + 1 full evaluations, then sweep the mesh
  // in O(|B|) per point.
  double best_improvement = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> mesh_points;
  simplex_mesh(mesh, B, mesh_points);
  for (int h = 0; h < d.horizon; ++h) {
    for (int s = 0; s < d.num_states; ++s) {
      std::vector<Eigen::MatrixXd> nu = response.Nu;
      Eigen::VectorXd w(B);
      for (int b = 0; b < B; ++b) {
        nu[h].row(s).setZero();
        nu[h](s, b) = 1.0;
        w[b] = evaluate_energy(game, policy, nu);  // c0 + w_b (vertex entropy = 0)
      }
      nu[h].row(s).setConstant(1.0 / B);
      double g_unif = evaluate_energy(game, policy, nu);
      double reach = (g_unif - w.mean()) * eta / std::log(static_cast<double>(B));
      if (B == 1) reach = 0.0;
      for (const auto& point : mesh_points) {
        double entropy = 0.0;
        double lin = 0.0;
        for (int b = 0; b < B; ++b) {
          lin += point[b] * w[b];
          if (point[b] > 0.0) entropy -= point[b] * std::log(point[b]);
        }
        double g = lin + reach * entropy / eta;
        best_improvement = std::max(best_improvement, g - base);
      }
    }
  }
  return best_improvement;
}

BruteForceResult brute_force_qse(const MarkovGame& game, const PrescriptionGrid& grid,
                                 std::uint64_t max_candidates) {
  const GameDims& d = game.dims();
  const int slots = d.horizon * d.num_states;
  double log_total = slots * std::log(static_cast<double>(grid.size()));
  if (log_total > std::log(static_cast<double>(max_candidates))) {
    throw TooLarge("brute force enumeration exceeds the candidate guard");
  }
  std::uint64_t total = 1;
  for (int i = 0; i < slots; ++i) total *= grid.size();

  BruteForceResult out;
  out.candidates = total;
  std::vector<std::size_t> digit(slots, 0);
  std::vector<Prescription> pres(slots);
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t it = 0; it < total; ++it) {
    for (int i = 0; i < slots; ++i) pres[i] = grid.at(digit[i]);
    LeaderPolicy policy(d, pres);
    double val = evaluate_J(game, policy);
    if (val > best) {
      best = val;
      out.policy = policy;
      out.value = val;
    }
    for (int i = slots - 1; i >= 0; --i) {
      if (++digit[i] < grid.size()) break;
      digit[i] = 0;
    }
  }
  return out;
}

PerfDiffReport check_performance_difference(
    const MarkovGame& game, const LeaderPolicy& policy,
    const std::vector<std::vector<double>>& U_tilde,
    const std::vector<Eigen::VectorXd>& W_tilde, const FollowerSolution& nu_tilde,
    double tol) {
  const GameDims& d = game.dims();
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions,
            H = d.horizon;
  FollowerSolution nu_true = quantal_response(game, policy);
  Occupancy occ = state_occupancy(game, policy, nu_true);
  double J = evaluate_J(game, policy);

  // T_h^{pi, nu~} U~_h(s)
  auto t_op = [&](int h, int s, const Eigen::MatrixXd& nu_rows,
                  const std::vector<double>& U) {
    double acc = 0.0;
    for (int b = 0; b < B; ++b) {
      for (int a = 0; a < A; ++a) {
        acc += nu_rows(s, b) * policy.at(h, s)(b, a) * U[(s * A + a) * B + b];
      }
    }
    return acc;
  };

  double bellman = 0.0;       // sum_h E[(U~ - u)(s_h,a_h,b_h) - W~_{h+1}(s_{h+1})]
  double mismatch = 0.0;      // sum_h E[W~_h(s_h) - (T^{pi,nu~} U~_h)(s_h)]
  double response_exact = 0.0;  // sum_h E[((T^{pi,nu~} - T^{pi,nu}) U~_h)(s_h)]
  double response_bound = 0.0;  // H * sum_h E||nu~ - nu||_1
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      double ds = occ.state[h][s];
      if (ds == 0.0) continue;
      mismatch += ds * (W_tilde[h][s] - t_op(h, s, nu_tilde.Nu[h], U_tilde[h]));
      response_exact += ds * (t_op(h, s, nu_tilde.Nu[h], U_tilde[h]) -
                              t_op(h, s, nu_true.Nu[h], U_tilde[h]));
      double l1 = (nu_tilde.Nu[h].row(s) - nu_true.Nu[h].row(s)).cwiseAbs().sum();
      response_bound += ds * H * l1;
      for (int b = 0; b < B; ++b) {
        double wb = ds * nu_true.Nu[h](s, b);
        for (int a = 0; a < A; ++a) {
          double w = wb * policy.at(h, s)(b, a);
          if (w == 0.0) continue;
          double inner = U_tilde[h][(s * A + a) * B + b] - game.u(h, s, a, b);
          if (h + 1 < H) {
            for (int s2 = 0; s2 < S; ++s2) {
              inner -= game.p(h, s, a, b, s2) * W_tilde[h + 1][s2];
            }
          }
          bellman += w * inner;
        }
      }
    }
  }

  PerfDiffReport rep;
  double t1 = 0.0;  // E[T_1^{pi,nu~} U~_1]
  for (int s = 0; s < S; ++s) {
    t1 += game.init_dist()[s] * t_op(0, s, nu_tilde.Nu[0], U_tilde[0]);
  }
  double w1 = game.init_dist().dot(W_tilde[0]);

  // general form: lhs <= Bellman error with T^{pi,nu~} targets + response bound
  double bellman_general = 0.0;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      double ds = occ.state[h][s];
      if (ds == 0.0) continue;
      for (int b = 0; b < B; ++b) {
        double wb = ds * nu_true.Nu[h](s, b);
        for (int a = 0; a < A; ++a) {
          double w = wb * policy.at(h, s)(b, a);
          if (w == 0.0) continue;
          double inner = U_tilde[h][(s * A + a) * B + b] - game.u(h, s, a, b);
          if (h + 1 < H) {
            for (int s2 = 0; s2 < S; ++s2) {
              inner -= game.p(h, s, a, b, s2) *
                       t_op(h + 1, s2, nu_tilde.Nu[h + 1], U_tilde[h + 1]);
            }
          }
          bellman_general += w * inner;
        }
      }
    }
  }
  rep.lhs_general = t1 - J;
  rep.rhs_general = bellman_general + response_bound;
  rep.lhs_linear = w1 - J;
  rep.identity_residual = rep.lhs_linear - (bellman + mismatch + response_exact);
  rep.rhs_linear = bellman + mismatch + response_bound;
  rep.ok = rep.lhs_general <= rep.rhs_general + tol &&
           std::abs(rep.identity_residual) <= tol &&
           rep.lhs_linear <= rep.rhs_linear + tol;
  return rep;
}

BoundsReport check_response_bounds(const MarkovGame& game, const LeaderPolicy& policy,
                                   const FollowerSolution& sol,
                                   const FollowerSolution& sol_tilde,
                                   std::uint64_t seed, double tol) {
  const GameDims& d = game.dims();
  const int B = d.num_follower_actions;
  const double eta = game.rationality();
  double b_a = 0.0;
  for (int h = 0; h < d.horizon; ++h) {
    b_a = std::max({b_a, sol.Adv[h].cwiseAbs().maxCoeff(),
                    sol_tilde.Adv[h].cwiseAbs().maxCoeff(),
                    sol.Q[h].cwiseAbs().maxCoeff(),
                    sol_tilde.Q[h].cwiseAbs().maxCoeff()});
  }

  auto rng = make_engine(seed, 0x626e6473ull);
  std::normal_distribution<double> normal(0.0, 1.0);

  BoundsReport rep;
  double inf = std::numeric_limits<double>::infinity();
  rep.tv_upper_slack = inf;
  rep.tv_lower1_slack = inf;
  rep.tv_lower2_slack = inf;
  rep.hellinger_lower_slack = inf;
  rep.kl_upper_slack = inf;
  rep.hessian_sandwich_slack = inf;
  rep.a_diff_identity_max_err = 0.0;
  const bool myopic = game.discount() == 0.0;

  for (int h = 0; h < d.horizon; ++h) {
    for (int s = 0; s < d.num_states; ++s) {
      Eigen::VectorXd nu = sol.Nu[h].row(s).transpose();
      Eigen::VectorXd nu_t = sol_tilde.Nu[h].row(s).transpose();
      Eigen::VectorXd adiff = (sol_tilde.Adv[h].row(s) - sol.Adv[h].row(s)).transpose();
      Eigen::VectorXd qdiff = (sol.Q[h].row(s) - sol_tilde.Q[h].row(s)).transpose();
      DistReport dist = dist_metrics(nu, nu_t);

      // TV upper bound, first- plus second-order term in |A~ - A|
      double ub = 0.0;
      for (int b = 0; b < B; ++b) {
        double x = std::abs(adiff[b]);
        ub += nu[b] * (x + 0.5 * eta * std::exp(eta * x) * x * x);
      }
      ub *= eta;
      rep.tv_upper_slack = std::min(rep.tv_upper_slack, ub - dist.tv);

      double lb1 = eta / (2.0 * (1.0 + 2.0 * eta * b_a)) * nu.dot(adiff.cwiseAbs());
      rep.tv_lower1_slack = std::min(rep.tv_lower1_slack, dist.tv - lb1);

      double lb2 = 0.0;
      for (int b = 0; b < B; ++b) {
        double x = std::abs(adiff[b]);
        lb2 += nu[b] * eta * std::exp(-eta * x) * x;
      }
      lb2 *= 0.5;
      rep.tv_lower2_slack = std::min(rep.tv_lower2_slack, dist.tv - lb2);

      double hl = eta * eta / (8.0 * (1.0 + eta * b_a) * (1.0 + eta * b_a)) *
                  nu.dot(adiff.cwiseAbs2());
      rep.hellinger_lower_slack =
          std::min(rep.hellinger_lower_slack, dist.hellinger * dist.hellinger - hl);

      double kl_ub = eta * (nu - nu_t).dot(qdiff);
      rep.kl_upper_slack = std::min(rep.kl_upper_slack, kl_ub - dist.kl);

      if (myopic) {
        // A - A~ = (E_{s,b} - E_s)[r^pi - r~^pi] + eta^{-1} KL(nu || nu~)
        Eigen::VectorXd rdiff = qdiff;  // myopic Q = r^pi
        double mean = nu.dot(rdiff);
        for (int b = 0; b < B; ++b) {
          double lhs = -adiff[b];
          double rhs = (rdiff[b] - mean) + dist.kl / eta;
          rep.a_diff_identity_max_err =
              std::max(rep.a_diff_identity_max_err, std::abs(lhs - rhs));
        }
      }

      // Hessian sandwich on random directions
      Eigen::MatrixXd L = Eigen::MatrixXd(nu.asDiagonal()) - nu * nu.transpose();
      Eigen::MatrixXd Hm = Eigen::MatrixXd(nu_t.asDiagonal()) - nu_t * nu_t.transpose();
      double e2 = std::exp(2.0 * eta * b_a);
      for (int rep_i = 0; rep_i < 4; ++rep_i) {
        Eigen::VectorXd g(B);
        for (int b = 0; b < B; ++b) g[b] = normal(rng);
        double lg = g.dot(L * g), hg = g.dot(Hm * g);
        rep.hessian_sandwich_slack =
            std::min({rep.hessian_sandwich_slack, e2 * lg - hg, hg - lg / e2});
      }
    }
  }
  (void)policy;
  rep.ok = rep.tv_upper_slack >= -tol && rep.tv_lower1_slack >= -tol &&
           rep.tv_lower2_slack >= -tol && rep.hellinger_lower_slack >= -tol &&
           rep.kl_upper_slack >= -tol && rep.hessian_sandwich_slack >= -tol &&
           (!myopic || rep.a_diff_identity_max_err <= 1e-9);
  return rep;
}

double empirical_coverage(const MarkovGame& game, const LinearGameParams& params,
                          const CoverageSpec& spec, std::uint64_t seed) {
  const GameDims& dims = game.dims();
  const double eta = game.rationality();
  PolicySampler sampler =
      spec.policy_mesh <= 1 ? uniform_deterministic_sampler(dims)
                            : uniform_grid_sampler(dims, spec.policy_mesh);
  int hits = 0;
  for (int rep = 0; rep < spec.reps; ++rep) {
    Dataset data = generate_offline_dataset(game, sampler, spec.T,
                                            derive_seed(seed, 900 + rep));
    double beta = spec.beta_override > 0.0
                      ? spec.beta_override
                      : default_beta_linear(params.dim, dims.horizon, eta, spec.T,
                                            spec.delta, spec.c_beta);
    bool all_h = true;
    for (int h = 0; h < dims.horizon && all_h; ++h) {
      ChoiceData slice = choice_slice(data, params, dims, h, eta);
      FitResult fit = fit_mle_myopic(slice, params.param_bound);
      double gap = nll_myopic(params.theta[h], slice) - fit.nll;
      if (gap > beta) all_h = false;
    }
    if (all_h) ++hits;
  }
  return static_cast<double>(hits) / spec.reps;
}

double grad_check_nll(const Eigen::VectorXd& theta, const ChoiceData& data,
                      double step) {
  Eigen::VectorXd analytic = nll_grad(theta, data);
  double worst = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd lo = theta, hi = theta;
    lo[i] -= step;
    hi[i] += step;
    double fd = (nll_myopic(hi, data) - nll_myopic(lo, data)) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - analytic[i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// chi-square p-values via the regularized incomplete gamma function

namespace {

double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  // Lentz's algorithm for the continued fraction of Q(a, x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, dd = 1.0 / b, h = dd;
  for (int i = 1; i < 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < tiny) dd = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    dd = 1.0 / dd;
    double del = dd * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw NumericError("gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi_square_pvalue(double stat, int dof) {
  if (dof <= 0) return 1.0;
  return gamma_q(dof / 2.0, stat / 2.0);
}

// ---------------------------------------------------------------------------
// verify battery

namespace {

CheckResult timed(const std::string& name, const std::function<std::pair<bool, double>()>& fn,
                  const std::string& detail = "") {
  auto start = std::chrono::steady_clock::now();
  CheckResult res;
  res.name = name;
  res.detail = detail;
  try {
    auto [ok, slack] = fn();
    res.passed = ok;
    res.slack = slack;
  } catch (const std::exception& e) {
    res.passed = false;
    res.detail = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// Delta^(1) tables of the response-model-error lemma: with
// g_l(s,b) = (Q~_l - r_l^pi - gamma P_l^pi V~_{l+1})(s,b) the follower
// Bellman error of the estimate, the conditional discounted sum obeys
//   Z_l(s,b) = g_l(s,b) + gamma sum_{s'} P_l^pi(s'|s,b) <nu_{l+1}(.|s'), Z_{l+1}(s',.)>
// under the true process, and Delta^(1)_h(s,b) = Z_h(s,b) - <nu_h(.|s), Z_h(s,.)>.
std::vector<Eigen::MatrixXd> delta1_tables(const MarkovGame& game,
                                           const LeaderPolicy& policy,
                                           const FollowerSolution& sol_true,
                                           const FollowerSolution& sol_tilde) {
  const GameDims& d = game.dims();
  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions,
            H = d.horizon;
  const double gamma = game.discount();
  std::vector<Eigen::MatrixXd> Z(H, Eigen::MatrixXd::Zero(S, B));
  Eigen::VectorXd z_next = Eigen::VectorXd::Zero(S);  // <nu_{l+1}, Z_{l+1}> per s'
  for (int l = H - 1; l >= 0; --l) {
    for (int s = 0; s < S; ++s) {
      const Prescription& alpha = policy.at(l, s);
      for (int b = 0; b < B; ++b) {
        double r_pi = 0.0;
        double pv = 0.0;   // (P_l^pi V~_{l+1})(s, b)
        double pz = 0.0;   // continuation of Z under the true process
        for (int a = 0; a < A; ++a) {
          double pa = alpha(b, a);
          if (pa == 0.0) continue;
          r_pi += pa * game.r(l, s, a, b);
          if (l + 1 < H) {
            for (int s2 = 0; s2 < S; ++s2) {
              double p = game.p(l, s, a, b, s2);
              pv += pa * p * sol_tilde.V[l + 1][s2];
              pz += pa * p * z_next[s2];
            }
          }
        }
        double g = sol_tilde.Q[l](s, b) - r_pi - gamma * pv;
        Z[l](s, b) = g + gamma * pz;
      }
    }
    for (int s = 0; s < S; ++s) {
      z_next[s] = sol_true.Nu[l].row(s).dot(Z[l].row(s));
    }
  }
  std::vector<Eigen::MatrixXd> delta(H);
  for (int l = 0; l < H; ++l) {
    delta[l] = Z[l];
    for (int s = 0; s < S; ++s) {
      double mean = sol_true.Nu[l].row(s).dot(Z[l].row(s));
      delta[l].row(s).array() -= mean;
    }
  }
  return delta;
}

LeaderPolicy random_policy(const GameDims& dims, std::mt19937_64& rng) {
  std::vector<Prescription> pres(static_cast<std::size_t>(dims.horizon) * dims.num_states);
  std::exponential_distribution<double> expo(1.0);
  for (auto& alpha : pres) {
    alpha.resize(dims.num_follower_actions, dims.num_leader_actions);
    for (int b = 0; b < dims.num_follower_actions; ++b) {
      double sum = 0.0;
      for (int a = 0; a < dims.num_leader_actions; ++a) {
        alpha(b, a) = expo(rng);
        sum += alpha(b, a);
      }
      alpha.row(b) /= sum;
    }
  }
  return LeaderPolicy(dims, std::move(pres));
}

}  // namespace

std::vector<CheckResult> run_verify_battery(std::uint64_t seed, int instances_small,
                                            int instances_large) {
  // each check owns its substream, so the pool order cannot change results
  using CheckFn = std::function<std::pair<bool, double>(std::uint64_t)>;
  std::vector<std::pair<std::string, CheckFn>> checks;

  checks.emplace_back("response_bounds", [=](std::uint64_t cs) -> std::pair<bool, double> {
    auto rng = make_engine(cs);
    std::uniform_int_distribution<int> dim_s(1, 3), dim_ab(1, 2), dim_h(1, 3);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances_large; ++i) {
      GameDims dims{dim_s(rng), dim_ab(rng), 1 + dim_ab(rng), dim_h(rng)};
      double gammas[3] = {0.0, 0.9, 1.0};
      double etas[3] = {0.5, 1.0, 5.0};
      double gamma = gammas[i % 3], eta = etas[(i / 3) % 3];
      MarkovGame game = make_random_game(dims, gamma, eta, derive_seed(cs, i));
      MarkovGame alt = make_random_game(dims, gamma, eta, derive_seed(cs, 50000 + i));
      LeaderPolicy policy = random_policy(dims, rng);
      FollowerSolution sol = quantal_response(game, policy);
      FollowerSolution sol_t = quantal_response_model(
          dims, gamma, eta, alt.follower_reward(), game.transition(), policy);
      BoundsReport rep = check_response_bounds(game, policy, sol, sol_t,
                                               derive_seed(cs, 90000 + i));
      if (!rep.ok) return {false, -1.0};
      worst = std::min({worst, rep.tv_upper_slack, rep.tv_lower1_slack,
                        rep.tv_lower2_slack, rep.hellinger_lower_slack,
                        rep.kl_upper_slack, rep.hessian_sandwich_slack});
    }
    return {true, worst};
  });

  checks.emplace_back("performance_difference", [=](std::uint64_t cs) -> std::pair<bool, double> {
    auto rng = make_engine(cs);
    std::uniform_int_distribution<int> dim_s(1, 3), dim_ab(1, 2), dim_h(1, 3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances_large; ++i) {
      GameDims dims{dim_s(rng), dim_ab(rng), 1 + dim_ab(rng), dim_h(rng)};
      MarkovGame game = make_random_game(dims, 0.0, 1.0, derive_seed(cs, 1000 + i));
      MarkovGame alt = make_random_game(dims, 0.0, 1.0, derive_seed(cs, 61000 + i));
      LeaderPolicy policy = random_policy(dims, rng);
      FollowerSolution nu_tilde = quantal_response_model(
          dims, 0.0, 1.0, alt.follower_reward(), game.transition(), policy);
      // U~ from the model response on the true env, W~ random perturbation
      LeaderValues vals = leader_values(game, policy, nu_tilde);
      std::vector<Eigen::VectorXd> W_tilde(dims.horizon);
      for (int h = 0; h < dims.horizon; ++h) {
        W_tilde[h] = vals.W[h];
        for (int s = 0; s < dims.num_states; ++s) {
          W_tilde[h][s] += 0.3 * (unif(rng) - 0.5);
        }
      }
      PerfDiffReport rep =
          check_performance_difference(game, policy, vals.U, W_tilde, nu_tilde);
      if (!rep.ok) return {false, rep.identity_residual};
      worst = std::min({worst, rep.rhs_general - rep.lhs_general,
                        rep.rhs_linear - rep.lhs_linear});
    }
    return {true, worst};
  });

  checks.emplace_back("response_model_error", [=](std::uint64_t cs) -> std::pair<bool, double> {
    auto rng = make_engine(cs);
    std::uniform_int_distribution<int> dim_s(1, 3), dim_ab(1, 2), dim_h(1, 3);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances_large; ++i) {
      GameDims dims{dim_s(rng), dim_ab(rng), 1 + dim_ab(rng), dim_h(rng)};
      double gamma = (i % 2 == 0) ? 0.0 : 1.0;
      MarkovGame game = make_random_game(dims, gamma, 0.5, derive_seed(cs, 2000 + i));
      MarkovGame alt = make_random_game(dims, gamma, 0.5, derive_seed(cs, 62000 + i));
      LeaderPolicy policy = random_policy(dims, rng);
      FollowerSolution sol = quantal_response(game, policy);
      FollowerSolution sol_t = quantal_response_model(
          dims, gamma, 0.5, alt.follower_reward(), game.transition(), policy);
      Occupancy occ = state_occupancy(game, policy, sol);
      double eta = game.rationality();
      double b_a = advantage_bound(game);
      double c0 = 2.0 * eta * dims.horizon;
      double c1 = eta * eta * dims.horizon *
                  (1.0 + 4.0 * effective_horizon(gamma, dims.horizon)) *
                  std::exp(2.0 * eta * b_a);
      // LHS: sum_h H E||nu~ - nu||_1 against the first-order |Delta^(1)| term
      // plus the second-order E[(A~ - A)^2] term
      double lhs = 0.0, first = 0.0, second = 0.0;
      std::vector<Eigen::MatrixXd> delta = delta1_tables(game, policy, sol, sol_t);
      for (int h = 0; h < dims.horizon; ++h) {
        for (int s = 0; s < dims.num_states; ++s) {
          double ds = occ.state[h][s];
          if (ds == 0.0) continue;
          lhs += ds * dims.horizon *
                 (sol_t.Nu[h].row(s) - sol.Nu[h].row(s)).cwiseAbs().sum();
          for (int b = 0; b < dims.num_follower_actions; ++b) {
            double w = ds * sol.Nu[h](s, b);
            double adiff = sol_t.Adv[h](s, b) - sol.Adv[h](s, b);
            second += w * adiff * adiff;
            first += w * std::abs(delta[h](s, b));
          }
        }
      }
      double rhs = c0 * first + c1 * second;
      if (lhs > rhs + 1e-9) return {false, rhs - lhs};
      worst = std::min(worst, rhs - lhs);
    }
    return {true, worst};
  });

  checks.emplace_back("identification", [=](std::uint64_t cs) -> std::pair<bool, double> {
    auto rng = make_engine(cs);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < instances_large; ++i) {
      int B = 2 + (i % 3);
      Eigen::VectorXd nu(B), x(B), diff(B);
      double sum = 0.0;
      for (int b = 0; b < B; ++b) {
        nu[b] = 0.05 + unif(rng);
        sum += nu[b];
      }
      nu /= sum;
      for (int b = 0; b < B; ++b) x[b] = unif(rng) + 0.1;
      for (int b = 0; b < B; ++b) diff[b] = 2.0 * unif(rng) - 1.0;
      diff -= (x.dot(diff) / x.squaredNorm()) * x;  // enforce <x, diff> = 0
      // eps = inf_xi <nu, |diff - xi|>: piecewise linear, minimized at a kink
      double eps = std::numeric_limits<double>::infinity();
      for (int b = 0; b < B; ++b) {
        double val = 0.0;
        for (int bb = 0; bb < B; ++bb) val += nu[bb] * std::abs(diff[bb] - diff[b]);
        eps = std::min(eps, val);
      }
      double kappa_over = (x.cwiseQuotient(nu)).cwiseAbs().maxCoeff() / std::abs(x.sum());
      double lhs = nu.dot(diff.cwiseAbs());
      double rhs = (1.0 + kappa_over) * eps;
      if (lhs > rhs + 1e-9) return {false, rhs - lhs};
      worst = std::min(worst, rhs - lhs);
    }
    return {true, worst};
  });

  checks.emplace_back("elliptical_potential", [=](std::uint64_t cs) -> std::pair<bool, double> {
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < std::max(1, instances_small / 10); ++i) {
      GameDims dims{2, 2, 2, 2};
      RandomLinearSpec spec{dims, 3, 0.0, 1.0, 1.0};
      LinearGame lg = make_random_linear_game(spec, derive_seed(cs, 3000 + i));
      PolicySampler sampler = uniform_deterministic_sampler(dims);
      Dataset data = generate_offline_dataset(lg.game, sampler, 120,
                                              derive_seed(cs, 3300 + i));
      double bphi = lg.params.feature_bound;
      double L = 4.0 * bphi * bphi;
      for (int h = 0; h < dims.horizon; ++h) {
        ChoiceData slice = choice_slice(data, lg.params, dims, h, lg.game.rationality());
        Eigen::MatrixXd U = Eigen::MatrixXd::Identity(spec.dim, spec.dim);
        double lhs = 0.0;
        int T = slice.size();
        for (const auto& o : slice.obs) {
          Eigen::MatrixXd X = covariance_state(lg.params.theta[h], o.phi,
                                               lg.game.rationality());
          lhs += std::sqrt(std::max(0.0, trace_pinv_product(U, X)));
          U += X;
        }
        double c0 = L / std::log(1.0 + bphi * bphi);
        double rhs = std::sqrt(c0 * spec.dim * T * std::log(1.0 + L * T / spec.dim));
        if (lhs > rhs + 1e-9) return {false, rhs - lhs};
        worst = std::min(worst, rhs - lhs);
      }
    }
    return {true, worst};
  });

  checks.emplace_back("gradient_check", [=](std::uint64_t cs) -> std::pair<bool, double> {
    auto rng = make_engine(cs);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < instances_small; ++i) {
      GameDims dims{2, 2, 2, 2};
      RandomLinearSpec spec{dims, 3, 0.0, 1.0, 1.0};
      LinearGame lg = make_random_linear_game(spec, derive_seed(cs, 4000 + i));
      Dataset data = generate_offline_dataset(
          lg.game, uniform_deterministic_sampler(dims), 40, derive_seed(cs, 4400 + i));
      ChoiceData slice = choice_slice(data, lg.params, dims, 0, lg.game.rationality());
      Eigen::VectorXd theta(spec.dim);
      for (int j = 0; j < spec.dim; ++j) theta[j] = unif(rng);
      worst = std::max(worst, grad_check_nll(theta, slice));
    }
    return {worst <= 1e-6, 1e-6 - worst};
  });

  std::vector<std::future<CheckResult>> futures;
  futures.reserve(checks.size());
  for (std::size_t i = 0; i < checks.size(); ++i) {
    std::string name = checks[i].first;
    CheckFn fn = checks[i].second;
    std::uint64_t cs = derive_seed(seed, 0xC0 + i);
    futures.push_back(std::async(std::launch::async, [name, fn, cs]() {
      return timed(name, [&]() { return fn(cs); });
    }));
  }
  std::vector<CheckResult> out;
  out.reserve(futures.size());
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

std::string to_junit_xml(const std::vector<CheckResult>& results) {
  int failures = 0;
  double total = 0.0;
  for (const auto& r : results) {
    if (!r.passed) ++failures;
    total += r.seconds;
  }
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<testsuite name=\"qse-verify\" tests=\"" << results.size() << "\" failures=\""
     << failures << "\" time=\"" << total << "\">\n";
  for (const auto& r : results) {
    os << "  <testcase name=\"" << r.name << "\" time=\"" << r.seconds << "\"";
    if (r.passed) {
      os << "/>\n";
    } else {
      os << ">\n    <failure message=\"slack=" << r.slack << " " << r.detail
         << "\"/>\n  </testcase>\n";
    }
  }
  os << "</testsuite>\n";
  return os.str();
}

}  // namespace qse
