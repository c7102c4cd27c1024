#include "qse/linear.hpp"

#include <cmath>
#include <random>

#include "qse/rng.hpp"

namespace qse {

LinearGameParams embed_linear(const MarkovGame& game) {
  const GameDims& d = game.dims();
  const int n = d.joint();
  LinearGameParams params;
  params.dim = n;
  params.feature_bound = 1.0;
  params.phi.assign(d.horizon, Eigen::MatrixXd::Identity(n, n));
  params.theta.resize(d.horizon);
  params.vartheta.resize(d.horizon);
  params.varpi.resize(d.horizon);
  double max_norm = 0.0;
  for (int h = 0; h < d.horizon; ++h) {
    Eigen::VectorXd th(n), vth(n);
    Eigen::MatrixXd mu(n, d.num_states);
    int row = 0;
    for (int s = 0; s < d.num_states; ++s) {
      for (int a = 0; a < d.num_leader_actions; ++a) {
        for (int b = 0; b < d.num_follower_actions; ++b, ++row) {
          th[row] = game.r(h, s, a, b);
          vth[row] = game.u(h, s, a, b);
          for (int s2 = 0; s2 < d.num_states; ++s2) {
            mu(row, s2) = game.p(h, s, a, b, s2);
          }
        }
      }
    }
    params.theta[h] = th;
    params.vartheta[h] = vth;
    params.varpi[h] = mu;  // already d x S: row = feature, column = s'
    max_norm = std::max(max_norm, th.norm());
  }
  params.param_bound = std::max(1.0, max_norm);
  return params;
}

MarkovGame game_from_linear(const GameDims& dims, const LinearGameParams& params,
                            const Eigen::VectorXd& init_dist, double discount,
                            double rationality) {
  const int n = dims.joint();
  const std::size_t joint = static_cast<std::size_t>(dims.horizon) * n;
  std::vector<double> u(joint), r(joint), P(joint * dims.num_states);
  for (int h = 0; h < dims.horizon; ++h) {
    const Eigen::MatrixXd& phi = params.phi[h];
    if (phi.rows() != n || phi.cols() != params.dim) {
      throw BadDimension("feature matrix shape mismatch");
    }
    Eigen::VectorXd rh = phi * params.theta[h];
    Eigen::VectorXd uh = phi * params.vartheta[h];
    Eigen::MatrixXd Ph = phi * params.varpi[h];  // n x S
    for (int row = 0; row < n; ++row) {
      std::size_t g = static_cast<std::size_t>(h) * n + row;
      u[g] = uh[row];
      r[g] = rh[row];
      for (int s2 = 0; s2 < dims.num_states; ++s2) {
        P[g * dims.num_states + s2] = Ph(row, s2);
      }
    }
  }
  return build_tabular_game(dims, init_dist, std::move(u), std::move(r), std::move(P),
                            discount, rationality);
}

std::vector<double> materialize_rewards(const GameDims& dims,
                                        const LinearGameParams& params,
                                        const std::vector<Eigen::VectorXd>& theta) {
  const int n = dims.joint();
  std::vector<double> r(static_cast<std::size_t>(dims.horizon) * n);
  for (int h = 0; h < dims.horizon; ++h) {
    Eigen::VectorXd rh = params.phi[h] * theta[h];
    for (int row = 0; row < n; ++row) r[static_cast<std::size_t>(h) * n + row] = rh[row];
  }
  return r;
}

LinearGame make_random_linear_game(const RandomLinearSpec& spec, std::uint64_t seed) {
  const GameDims& dims = spec.dims;
  const int n = dims.joint(), d = spec.dim;
  auto rng = make_engine(seed, 0x6c696e65ull);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  LinearGameParams params;
  params.dim = d;
  params.phi.resize(dims.horizon);
  params.theta.resize(dims.horizon);
  params.vartheta.resize(dims.horizon);
  params.varpi.resize(dims.horizon);
  double max_norm = 0.0, max_feat = 0.0;
  for (int h = 0; h < dims.horizon; ++h) {
    Eigen::MatrixXd phi(n, d);
    for (int row = 0; row < n; ++row) {
      double sum = 0.0;
      for (int j = 0; j < d; ++j) {
        phi(row, j) = expo(rng);
        sum += phi(row, j);
      }
      phi.row(row) /= sum;  // features live on the d-simplex
      max_feat = std::max(max_feat, phi.row(row).norm());
    }
    Eigen::MatrixXd mu(d, dims.num_states);
    for (int j = 0; j < d; ++j) {
      double sum = 0.0;
      for (int s2 = 0; s2 < dims.num_states; ++s2) {
        mu(j, s2) = expo(rng);
        sum += mu(j, s2);
      }
      mu.row(j) /= sum;  // each factor is a distribution over s'
    }
    Eigen::VectorXd th(d), vth(d);
    for (int j = 0; j < d; ++j) th[j] = spec.reward_scale * unif(rng);
    for (int j = 0; j < d; ++j) vth[j] = unif(rng);
    params.phi[h] = phi;
    params.varpi[h] = mu;
    params.theta[h] = th;
    params.vartheta[h] = vth;
    max_norm = std::max(max_norm, th.norm());
  }
  params.feature_bound = std::max(1.0, max_feat);
  params.param_bound = std::max(max_norm, 1e-6);

  Eigen::VectorXd rho0(dims.num_states);
  for (int s = 0; s < dims.num_states; ++s) rho0[s] = expo(rng);
  rho0 /= rho0.sum();

  MarkovGame game = game_from_linear(dims, params, rho0, spec.discount,
                                     spec.rationality);
  return LinearGame{std::move(game), std::move(params)};
}

double linear_reproduction_error(const MarkovGame& game, const LinearGameParams& params) {
  const GameDims& d = game.dims();
  double worst = 0.0;
  for (int h = 0; h < d.horizon; ++h) {
    Eigen::VectorXd rh = params.phi[h] * params.theta[h];
    Eigen::VectorXd uh = params.phi[h] * params.vartheta[h];
    Eigen::MatrixXd Ph = params.phi[h] * params.varpi[h];
    int row = 0;
    for (int s = 0; s < d.num_states; ++s) {
      for (int a = 0; a < d.num_leader_actions; ++a) {
        for (int b = 0; b < d.num_follower_actions; ++b, ++row) {
          worst = std::max(worst, std::abs(rh[row] - game.r(h, s, a, b)));
          worst = std::max(worst, std::abs(uh[row] - game.u(h, s, a, b)));
          for (int s2 = 0; s2 < d.num_states; ++s2) {
            worst = std::max(worst, std::abs(Ph(row, s2) - game.p(h, s, a, b, s2)));
          }
        }
      }
    }
  }
  return worst;
}

}  // namespace qse
