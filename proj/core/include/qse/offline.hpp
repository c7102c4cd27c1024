#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qse/mle.hpp"
#include "qse/planner.hpp"

namespace qse {

enum class Scheme { S1, S2, S3, S4, S5 };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct LearnerParams {
  double beta = 0.0;        // confidence width; <= 0 means use default_beta_linear
  double c_beta = 1.0;      // multiplier inside the beta formula
  double c1 = 1.0;          // Gamma^(1) constant
  double delta = 0.1;
  double param_bound = 1.0; // B_Theta
  int sample_size = 64;     // confidence-set sample
  int mesh = 10;            // prescription grid mesh
  // Diagnostic hook: when nonempty (one vector per h), skip fitting and use
  // these parameters as the sole confidence member.
  std::vector<Eigen::VectorXd> pinned_theta;
};

// Ridge regression Lambda = sum phi phi^T + I, omega = Lambda^{-1} sum phi y,
// with y_i = u_i + W_next(s'_i). gamma1_coef premultiplies
// sqrt(phi^T Lambda^{-1} phi).
struct RidgeResult {
  Eigen::VectorXd omega;
  Eigen::MatrixXd Lambda;
  double gamma1_coef = 0.0;
};
RidgeResult ridge_and_gamma1(const Dataset& data, const LinearGameParams& params,
                             const GameDims& dims, int h,
                             const Eigen::VectorXd& W_next, double c1,
                             double delta);

// Gamma^(2) = 2 B_U (eta xi + C3 xi^2) with
//   xi = sqrt(trace(Psi^dagger Sigma_state)) * sqrt(8 C_eta^2 beta + 4 B_Theta^2),
//   C3 = eta^2 exp(2 eta B_A) (2 + eta B_A exp(2 eta B_A)) / 2.
double gamma2_penalty(const Eigen::MatrixXd& Sigma_state, const Eigen::MatrixXd& Psi,
                      double beta, double eta, double advantage_bound,
                      double param_bound, double B_U);
double c3_constant(double eta, double advantage_bound);
double c_eta_constant(double eta, double advantage_bound);

struct PessimisticEstimate {
  Scheme scheme = Scheme::S3;
  LeaderPolicy policy;
  std::vector<std::vector<double>> U_hat;   // per h, flat (s,a,b), truncated
  std::vector<Eigen::VectorXd> W_hat;       // per h, scheme objective values
  std::vector<Eigen::VectorXd> omega;       // ridge weights per h
  std::vector<Eigen::MatrixXd> Lambda;      // ridge kernels per h
  std::vector<Eigen::VectorXd> theta_mle;   // MLE center per h
  double beta = 0.0;
  double W1_mean = 0.0;                     // E_{rho0}[W_hat_1]
};

// Offline MLE-PVI for a myopic follower (schemes S1/S2/S3). The learner sees
// only the dataset and the public features; follower rewards stay hidden.
PessimisticEstimate mle_pvi(const Dataset& data, const LinearGameParams& params,
                            const GameDims& dims, const Eigen::VectorXd& init_dist,
                            double eta, Scheme scheme, const LearnerParams& lp,
                            const PrescriptionGrid& grid, std::uint64_t seed);

// Finite-class candidates for the general-function-class learners.
struct UTuple {
  std::vector<std::vector<double>> U;  // per h, flat (s,a,b); U_{H+1} = 0
};
struct ThetaTuple {
  std::vector<Eigen::VectorXd> theta;  // per h
};

// Leader Bellman loss l_h(U'_h, U_{h+1}, theta_{h+1}, pi) summed over the
// dataset (the offline variant, pi fixed).
double bellman_loss_offline(const UTuple& U, int h, const ThetaTuple& theta,
                            const LeaderPolicy& pi, const Dataset& data,
                            const LinearGameParams& params, const GameDims& dims,
                            double eta);

struct BcpResult {
  LeaderPolicy policy;
  int policy_index = -1;
  double pessimistic_value = 0.0;
  std::vector<int> skipped_policies;  // empty confidence set, logged not silent
};

// Offline MLE-BCP specialized to finite classes: per policy, keep the pairs
// passing both sublevel tests, then maximize the pessimistic initial value.
BcpResult mle_bcp(const Dataset& data, const std::vector<UTuple>& U_class,
                  const std::vector<ThetaTuple>& theta_class,
                  const std::vector<LeaderPolicy>& policy_class,
                  const LinearGameParams& params, const GameDims& dims,
                  const Eigen::VectorXd& init_dist, double eta, double beta);

struct PmleResult {
  LeaderPolicy policy;
  int policy_index = -1;
  int model_index = -1;   // pessimistic model chosen for the winner
  double pessimistic_value = 0.0;
  std::vector<int> confidence_members;
};

// Offline PMLE for a farsighted follower over a finite model class:
// C(beta) per the generalized likelihood, then argmax_pi min_{M in C} J(pi, M).
PmleResult pmle_farsighted(const Dataset& data, const std::vector<MarkovGame>& model_class,
                           const std::vector<LeaderPolicy>& policy_class,
                           double beta);

}  // namespace qse
