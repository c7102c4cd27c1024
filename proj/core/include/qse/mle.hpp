#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qse/game.hpp"
#include "qse/linear.hpp"
#include "qse/quantal.hpp"
#include "qse/trajectory.hpp"

namespace qse {

// One step-h choice observation: the policy-integrated feature rows
// Phi(b,:) = phi^{pi}(s_i, b) and the follower action that was taken.
struct ChoiceObs {
  Eigen::MatrixXd phi;  // |B| x d
  int b = 0;
};

// The step-h slice of a dataset, reduced to what the likelihood needs.
struct ChoiceData {
  std::vector<ChoiceObs> obs;
  double eta = 1.0;
  int dim = 0;

  int size() const { return static_cast<int>(obs.size()); }
};

// Builds the step-h choice slice from a dataset, integrating features over
// each episode's announced prescription.
ChoiceData choice_slice(const Dataset& data, const LinearGameParams& params,
                        const GameDims& dims, int h, double eta);

// Negative log-likelihood of the observed actions under nu^{pi,theta}:
//   L(theta) = -sum_i [ eta <phi_i(b_i), theta> - logsumexp_b eta <phi_i(b), theta> ].
double nll_myopic(const Eigen::VectorXd& theta, const ChoiceData& data);

// Analytic gradient: eta * sum_i ( E_{nu_i}[phi_i] - phi_i(b_i) ).
Eigen::VectorXd nll_grad(const Eigen::VectorXd& theta, const ChoiceData& data);

// Hessian: eta^2 * sum_i Cov_{nu_i}[phi_i]; positive semidefinite.
Eigen::MatrixXd nll_hess(const Eigen::VectorXd& theta, const ChoiceData& data);

struct FitResult {
  Eigen::VectorXd theta;
  bool converged = false;
  double grad_norm = 0.0;
  double nll = 0.0;
  int iterations = 0;
};

// Damped Newton with projection onto ||theta||_2 <= param_bound. Converges
// when the projected gradient norm falls below tol or the boundary KKT
// condition holds; otherwise returns the best iterate flagged.
FitResult fit_mle_myopic(const ChoiceData& data, double param_bound,
                         double tol = 1e-8, int max_iterations = 200,
                         const Eigen::VectorXd* warm_start = nullptr);

// Data covariance Sigma_{h,D}^theta = T^{-1} sum_i Cov_{nu_i}[phi_i] (or the
// unnormalized sum when normalize = false, matching the online Sigma_{h,t}).
Eigen::MatrixXd covariance_data(const Eigen::VectorXd& theta,
                                const ChoiceData& data, bool normalize = true);

// Per-state covariance Sigma_s^{pi,theta} = Cov_{b ~ nu}[ phi^pi(s, b) ] for
// one observation's feature block.
Eigen::MatrixXd covariance_state(const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& phi, double eta);

// Eigendecomposition pseudo-inverse with relative threshold
// 1e-10 * max eigenvalue; Sigma matrices are legitimately rank-deficient.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& sym, double rel_tol = 1e-10);

// trace(Psi^dagger Sigma) via the thresholded eigendecomposition of Psi.
double trace_pinv_product(const Eigen::MatrixXd& Psi, const Eigen::MatrixXd& Sigma,
                          double rel_tol = 1e-10);

// Null-space dimension of a symmetric PSD matrix at relative threshold.
int null_space_dim(const Eigen::MatrixXd& sym, double rel_tol = 1e-10);

// Comparison-graph Laplacian L_D = T^{-1} sum_i Phi_i (K I - 1 1^T) Phi_i^T,
// the uniform-response counterpart of Sigma_{h,D}. Diagnostic only; no
// learner consumes it.
Eigen::MatrixXd laplacian_data(const ChoiceData& data);

// Eigen-ratio diagnostic comparing the covariance to the Laplacian:
// min{ lambda_max(Phi-bar) / lambda_min+(Sigma), K / min_i lambda_2(Xi_i) },
// large values flag datasets where the likelihood curvature is much weaker
// than the raw comparison graph suggests.
double laplacian_ratio_diagnostic(const Eigen::VectorXd& theta, const ChoiceData& data);

// Sublevel confidence set C(beta) = { theta : L(theta) <= min L + beta } with
// a finite member sample drawn from the MLE-centered ellipsoid
// ||theta - center||^2_{T Sigma + I} <= 8 C_eta^2 beta + 4 B_Theta^2 and
// rejection-filtered by the exact sublevel test. The center always passes.
struct ConfidenceSet {
  double beta = 0.0;
  double min_nll = 0.0;
  Eigen::VectorXd center;                 // theta_hat
  std::vector<Eigen::VectorXd> sample;    // members, center included
  const ChoiceData* data = nullptr;
  double param_bound = 0.0;

  bool contains(const Eigen::VectorXd& theta) const;
  double nll_gap(const Eigen::VectorXd& theta) const;
};

ConfidenceSet confidence_set(const ChoiceData& data, double beta,
                             int sample_size, double param_bound, double c_eta,
                             std::uint64_t seed,
                             const Eigen::VectorXd* warm_start = nullptr);

// Default beta = c * d * log(H (1 + eta T^2) / delta); the formula fixes the
// shape, the constant c is a calibration knob with a CLI override.
double default_beta_linear(int dim, int horizon, double eta, int T, double delta,
                           double c = 1.0);

// QRE operator: (Upsilon f)(s,b) = <pi(.|s,b), f(s,.,b)> - <pi tensor nu, f>.
// f_ab is A x B at the state in question, alpha the prescription, nu_s the
// response at that state.
double qre_apply(const Eigen::MatrixXd& f_ab, const Prescription& alpha,
                 const Eigen::VectorXd& nu_s, int b);

// Generalized likelihood for farsighted model M (per step h):
//   -sum_i [ eta A_h^{pi_i,M}(s_i,b_i) + log P^M_h(s'_i | s_i,a_i,b_i)
//            - (u_i - u^M_h(s_i,a_i,b_i))^2 ].
// Returns +infinity when M assigns probability 0 to an observed transition.
// Responses are solved per episode policy under M.
std::vector<double> nll_farsighted(const MarkovGame& model, const Dataset& data);

// D^2_{RL,h}(M, M*; pi): Hellinger^2 of responses + Hellinger^2 of
// transitions + squared leader-reward gap, all under the (pi, M*) occupancy,
// computed exactly by forward state-marginal enumeration. Returns one value
// per step h.
std::vector<double> d_rl_squared(const MarkovGame& model, const MarkovGame& truth,
                                 const LeaderPolicy& policy);

}  // namespace qse
