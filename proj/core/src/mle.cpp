#include "qse/mle.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "qse/oracle.hpp"
#include "qse/rng.hpp"

namespace qse {

ChoiceData choice_slice(const Dataset& data, const LinearGameParams& params,
                        const GameDims& dims, int h, double eta) {
  ChoiceData slice;
  slice.eta = eta;
  slice.dim = params.dim;
  slice.obs.reserve(data.trajectories.size());
  const int A = dims.num_leader_actions, B = dims.num_follower_actions;
  for (const auto& traj : data.trajectories) {
    const LeaderPolicy& pi = data.policy_of(traj);
    const TrajStep& step = traj.steps[h];
    const Prescription& alpha = pi.at(h, step.s);
    Eigen::MatrixXd phi(B, params.dim);
    for (int b = 0; b < B; ++b) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(params.dim);
      for (int a = 0; a < A; ++a) {
        if (alpha(b, a) == 0.0) continue;
        int r = (step.s * A + a) * B + b;
        row += alpha(b, a) * params.phi[h].row(r);
      }
      phi.row(b) = row;
    }
    slice.obs.push_back(ChoiceObs{std::move(phi), step.b});
  }
  return slice;
}

namespace {

Eigen::VectorXd softmax_logits(const Eigen::VectorXd& logits) {
  double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

}  // namespace

double nll_myopic(const Eigen::VectorXd& theta, const ChoiceData& data) {
  if (data.obs.empty()) throw EmptyData("likelihood needs at least one observation");
  double total = 0.0;
  for (const auto& o : data.obs) {
    Eigen::VectorXd logits = data.eta * (o.phi * theta);
    total += log_sum_exp(logits) - logits[o.b];
  }
  return total;
}

Eigen::VectorXd nll_grad(const Eigen::VectorXd& theta, const ChoiceData& data) {
  if (data.obs.empty()) throw EmptyData("likelihood needs at least one observation");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (const auto& o : data.obs) {
    Eigen::VectorXd nu = softmax_logits(data.eta * (o.phi * theta));
    g += data.eta * (o.phi.transpose() * nu - o.phi.row(o.b).transpose());
  }
  return g;
}

Eigen::MatrixXd nll_hess(const Eigen::VectorXd& theta, const ChoiceData& data) {
  Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(theta.size(), theta.size());
  for (const auto& o : data.obs) {
    Eigen::VectorXd nu = softmax_logits(data.eta * (o.phi * theta));
    Eigen::VectorXd mean = o.phi.transpose() * nu;
    Eigen::MatrixXd centered = o.phi.rowwise() - mean.transpose();
    Hm += data.eta * data.eta *
          centered.transpose() * nu.asDiagonal() * centered;
  }
  return Hm;
}

FitResult fit_mle_myopic(const ChoiceData& data, double param_bound, double tol,
                         int max_iterations, const Eigen::VectorXd* warm_start) {
  if (data.obs.empty()) throw EmptyData("cannot fit on an empty slice");
  const int d = data.dim;
  Eigen::VectorXd theta =
      (warm_start && warm_start->size() == d) ? *warm_start : Eigen::VectorXd::Zero(d);
  if (theta.norm() > param_bound) theta *= param_bound / theta.norm();

  // KKT residual for min NLL over the ball: interior uses ||g||; on an
  // active boundary with the multiplier sign satisfied only the tangential
  // component counts.
  auto kkt_residual = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& g) {
    double gnorm = g.norm();
    if (th.norm() >= param_bound - 1e-12) {
      Eigen::VectorXd n = th / th.norm();
      double radial = g.dot(n);
      if (radial < 0.0) gnorm = (g - radial * n).norm();
    }
    return gnorm;
  };

  FitResult out;
  double nll = nll_myopic(theta, data);
  int it = 0;
  for (; it < max_iterations; ++it) {
    Eigen::VectorXd g = nll_grad(theta, data);
    out.grad_norm = kkt_residual(theta, g);
    if (out.grad_norm <= tol) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd Hm = nll_hess(theta, data);
    double damping = 1e-10 * std::max(1.0, Hm.trace());
    Eigen::MatrixXd Hd = Hm + damping * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd step = Hd.ldlt().solve(-g);
    if ((theta + step).norm() > param_bound) {
      // constrained step: raise the Levenberg multiplier until the Newton
      // target lands on the ball (||theta + step(lambda)|| decreases in
      // lambda), instead of radially projecting the unconstrained step
      double lo = 0.0, hi = std::max(1.0, Hd.trace());
      while ((theta + Eigen::VectorXd(
                  (Hd + hi * Eigen::MatrixXd::Identity(d, d)).ldlt().solve(-g)))
                 .norm() > param_bound) {
        lo = hi;
        hi *= 4.0;
        if (hi > 1e14) break;
      }
      for (int bs = 0; bs < 80; ++bs) {
        double mid = 0.5 * (lo + hi);
        Eigen::VectorXd cand =
            (Hd + mid * Eigen::MatrixXd::Identity(d, d)).ldlt().solve(-g);
        if ((theta + cand).norm() > param_bound) {
          lo = mid;
        } else {
          hi = mid;
          step = cand;
        }
      }
    }
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      Eigen::VectorXd cand = theta + t * step;
      if (cand.norm() > param_bound) cand *= param_bound / cand.norm();
      double cand_nll = nll_myopic(cand, data);
      if (cand_nll <= nll - 1e-14 * std::abs(nll)) {
        theta = cand;
        nll = cand_nll;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;  // stationary up to line-search resolution
  }
  out.theta = theta;
  out.nll = nll;
  out.iterations = it;
  if (!out.converged) {
    out.grad_norm = kkt_residual(theta, nll_grad(theta, data));
    out.converged = out.grad_norm <= tol;
  }
  return out;
}

Eigen::MatrixXd covariance_state(const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& phi, double eta) {
  Eigen::VectorXd nu = softmax_logits(eta * (phi * theta));
  Eigen::VectorXd mean = phi.transpose() * nu;
  Eigen::MatrixXd centered = phi.rowwise() - mean.transpose();
  return centered.transpose() * nu.asDiagonal() * centered;
}

Eigen::MatrixXd covariance_data(const Eigen::VectorXd& theta, const ChoiceData& data,
                                bool normalize) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(data.dim, data.dim);
  for (const auto& o : data.obs) {
    sigma += covariance_state(theta, o.phi, data.eta);
  }
  if (normalize && !data.obs.empty()) sigma /= static_cast<double>(data.obs.size());
  return sigma;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& sym, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd& ev = es.eigenvalues();
  double cutoff = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double trace_pinv_product(const Eigen::MatrixXd& Psi, const Eigen::MatrixXd& Sigma,
                          double rel_tol) {
  return (pseudo_inverse(Psi, rel_tol) * Sigma).trace();
}

int null_space_dim(const Eigen::MatrixXd& sym, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd& ev = es.eigenvalues();
  double cutoff = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  int dim = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] <= cutoff) ++dim;
  }
  return dim;
}

Eigen::MatrixXd laplacian_data(const ChoiceData& data) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(data.dim, data.dim);
  for (const auto& o : data.obs) {
    const int K = static_cast<int>(o.phi.rows());
    Eigen::VectorXd colsum = o.phi.colwise().sum().transpose();
    L += static_cast<double>(K) * o.phi.transpose() * o.phi -
         colsum * colsum.transpose();
  }
  if (!data.obs.empty()) L /= static_cast<double>(data.obs.size());
  return L;
}

double laplacian_ratio_diagnostic(const Eigen::VectorXd& theta,
                                  const ChoiceData& data) {
  if (data.obs.empty()) throw EmptyData("diagnostic needs observations");
  Eigen::MatrixXd sigma = covariance_data(theta, data, true);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(data.dim, data.dim);
  double min_lambda2 = std::numeric_limits<double>::infinity();
  const int K = static_cast<int>(data.obs.front().phi.rows());
  for (const auto& o : data.obs) {
    gram += o.phi.transpose() * o.phi;
    Eigen::VectorXd nu = softmax_logits(data.eta * (o.phi * theta));
    Eigen::MatrixXd xi = Eigen::MatrixXd(nu.asDiagonal()) - nu * nu.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xi);
    if (K >= 2) min_lambda2 = std::min(min_lambda2, es.eigenvalues()[1]);
  }
  gram /= static_cast<double>(data.obs.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(gram), es(sigma);
  double lam_max_gram = eg.eigenvalues().maxCoeff();
  double lam_min_sigma = std::numeric_limits<double>::infinity();
  double cutoff = 1e-10 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()[i] > cutoff) {
      lam_min_sigma = std::min(lam_min_sigma, es.eigenvalues()[i]);
    }
  }
  double first = lam_max_gram / lam_min_sigma;
  double second = (min_lambda2 > 0.0) ? K / min_lambda2
                                      : std::numeric_limits<double>::infinity();
  return std::min(first, second);
}

bool ConfidenceSet::contains(const Eigen::VectorXd& theta) const {
  return nll_gap(theta) <= beta + 1e-12;
}

double ConfidenceSet::nll_gap(const Eigen::VectorXd& theta) const {
  return nll_myopic(theta, *data) - min_nll;
}

ConfidenceSet confidence_set(const ChoiceData& data, double beta, int sample_size,
                             double param_bound, double c_eta, std::uint64_t seed,
                             const Eigen::VectorXd* warm_start) {
  FitResult fit = fit_mle_myopic(data, param_bound, 1e-8, 200, warm_start);
  ConfidenceSet set;
  set.beta = beta;
  set.min_nll = fit.nll;
  set.center = fit.theta;
  set.data = &data;
  set.param_bound = param_bound;
  set.sample.push_back(fit.theta);
  if (sample_size <= 1) return set;  // center-only (S3/S5 paths)

  const int d = data.dim;
  const int T = data.size();
  // ellipsoid surrogate: ||theta - center||^2_{T Sigma + I} <= radius^2
  Eigen::MatrixXd Psi =
      covariance_data(fit.theta, data, true) * static_cast<double>(T) +
      Eigen::MatrixXd::Identity(d, d);
  double radius = std::sqrt(8.0 * c_eta * c_eta * beta + 4.0 * param_bound * param_bound);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Psi);
  Eigen::VectorXd scale(d);
  for (int i = 0; i < d; ++i) {
    scale[i] = 1.0 / std::sqrt(std::max(es.eigenvalues()[i], 1e-12));
  }
  Eigen::MatrixXd transform = es.eigenvectors() * scale.asDiagonal();

  auto rng = make_engine(seed, 0x636f6e66ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int max_attempts = 80 * std::max(sample_size, 1);
  for (int attempt = 0;
       attempt < max_attempts && static_cast<int>(set.sample.size()) < sample_size;
       ++attempt) {
    Eigen::VectorXd dir(d);
    for (int i = 0; i < d; ++i) dir[i] = normal(rng);
    dir.normalize();
    double rad = radius * std::pow(unif(rng), 1.0 / d);
    Eigen::VectorXd cand = fit.theta + transform * (rad * dir);
    if (cand.norm() > param_bound) cand *= param_bound / cand.norm();
    if (set.contains(cand)) set.sample.push_back(std::move(cand));
  }
  return set;
}

double default_beta_linear(int dim, int horizon, double eta, int T, double delta,
                           double c) {
  double t = std::max(T, 1);
  return c * dim * std::log(horizon * (1.0 + eta * t * t) / delta);
}

double qre_apply(const Eigen::MatrixXd& f_ab, const Prescription& alpha,
                 const Eigen::VectorXd& nu_s, int b) {
  if (f_ab.rows() != alpha.cols() || f_ab.cols() != alpha.rows() ||
      nu_s.size() != alpha.rows()) {
    throw DimensionMismatch("qre_apply: table/prescription shapes disagree");
  }
  double conditional = alpha.row(b).dot(f_ab.col(b));
  double average = 0.0;
  for (int bb = 0; bb < alpha.rows(); ++bb) {
    average += nu_s[bb] * alpha.row(bb).dot(f_ab.col(bb));
  }
  return conditional - average;
}

std::vector<double> nll_farsighted(const MarkovGame& model, const Dataset& data) {
  const GameDims& d = model.dims();
  std::vector<double> nll(d.horizon, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& traj : data.trajectories) {
    const LeaderPolicy& pi = data.policy_of(traj);
    FollowerSolution sol = quantal_response(model, pi);
    for (int h = 0; h < d.horizon; ++h) {
      if (std::isinf(nll[h])) continue;
      const TrajStep& step = traj.steps[h];
      double term = model.rationality() * sol.Adv[h](step.s, step.b);
      if (h + 1 < d.horizon) {
        double p = model.p(h, step.s, step.a, step.b, traj.steps[h + 1].s);
        if (p <= 0.0) {
          nll[h] = inf;  // observed transition impossible under the model
          continue;
        }
        term += std::log(p);
      }
      double du = step.u - model.u(h, step.s, step.a, step.b);
      term -= du * du;
      nll[h] -= term;
    }
  }
  return nll;
}

std::vector<double> d_rl_squared(const MarkovGame& model, const MarkovGame& truth,
                                 const LeaderPolicy& policy) {
  const GameDims& d = truth.dims();
  if (model.dims() != d) throw DimensionMismatch("model dims differ from truth");
  FollowerSolution nu_truth = quantal_response(truth, policy);
  FollowerSolution nu_model = quantal_response(model, policy);
  Occupancy occ = state_occupancy(truth, policy, nu_truth);

  const int S = d.num_states, A = d.num_leader_actions, B = d.num_follower_actions;
  std::vector<double> out(d.horizon, 0.0);
  for (int h = 0; h < d.horizon; ++h) {
    double total = 0.0;
    for (int s = 0; s < S; ++s) {
      double ds = occ.state[h][s];
      if (ds == 0.0) continue;
      {
        Eigen::VectorXd p = nu_truth.Nu[h].row(s).transpose();
        Eigen::VectorXd q = nu_model.Nu[h].row(s).transpose();
        double h2 = 0.5 * (p.cwiseSqrt() - q.cwiseSqrt()).squaredNorm();
        total += ds * h2;
      }
      for (int b = 0; b < B; ++b) {
        double wb = nu_truth.Nu[h](s, b);
        for (int a = 0; a < A; ++a) {
          double w = ds * wb * policy.at(h, s)(b, a);
          if (w == 0.0) continue;
          double h2 = 0.0;
          for (int s2 = 0; s2 < S; ++s2) {
            double dsq = std::sqrt(truth.p(h, s, a, b, s2)) -
                         std::sqrt(model.p(h, s, a, b, s2));
            h2 += dsq * dsq;
          }
          double du = truth.u(h, s, a, b) - model.u(h, s, a, b);
          total += w * (0.5 * h2 + du * du);
        }
      }
    }
    out[h] = total;
  }
  return out;
}

}  // namespace qse
