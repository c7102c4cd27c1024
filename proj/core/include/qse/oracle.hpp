#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qse/mle.hpp"
#include "qse/planner.hpp"
#include "qse/quantal.hpp"

namespace qse {

// Exact occupancy of the process (pi, nu, P): state marginals d_h(s) and the
// joint weights d_h(s) * nu(b|s) * pi(a|s,b). Shared by the brute-force
// verifiers; independent of the planner's backward recursions.
struct Occupancy {
  std::vector<Eigen::VectorXd> state;  // H+1 entries
};
Occupancy state_occupancy(const MarkovGame& game, const LeaderPolicy& policy,
                          const FollowerSolution& response);

// G(pi, nu) = E[ sum_h gamma^{h-1} (r_h + eta^{-1} H(nu_h(.|s_h))) ] computed
// by forward enumeration for an arbitrary follower policy nu (S x B rows per
// step). The independent energy oracle behind the grid-search check.
double evaluate_energy(const MarkovGame& game, const LeaderPolicy& policy,
                       const std::vector<Eigen::MatrixXd>& nu);

// Blockwise grid search over the simplex mesh: holding all other (h, s)
// blocks of `response` fixed, scans every mesh distribution at each block and
// reports the largest improvement of G over the computed response. Mesh step
// is 1/mesh.
double energy_improvement_by_grid(const MarkovGame& game, const LeaderPolicy& policy,
                                  const FollowerSolution& response, int mesh);

// Enumerates every grid-valued policy (guard: |grid|^(H |S|) <= max_candidates,
// throws TooLarge) and returns the exact maximizer of J.
struct BruteForceResult {
  LeaderPolicy policy;
  double value = 0.0;
  std::uint64_t candidates = 0;
};
BruteForceResult brute_force_qse(const MarkovGame& game, const PrescriptionGrid& grid,
                                 std::uint64_t max_candidates = 1000000);

// Performance-difference check for estimates (tilde U, tilde W, tilde nu)
// against policy pi on the true game. Verifies the exact three-term identity
// and the Hoelder-bounded inequality; all expectations exact via occupancy.
struct PerfDiffReport {
  double lhs_general = 0.0;     // E[T_1^{pi,nu~} U~_1] - J(pi)
  double rhs_general = 0.0;     // Bellman error + H * sum E||nu~ - nu||_1
  double lhs_linear = 0.0;      // E[W~_1] - J(pi)
  double identity_residual = 0.0;  // lhs_linear minus exact three-term sum
  double rhs_linear = 0.0;      // bound with the quantal-response term
  bool ok = false;
};
PerfDiffReport check_performance_difference(const MarkovGame& game,
                                            const LeaderPolicy& policy,
                                            const std::vector<std::vector<double>>& U_tilde,
                                            const std::vector<Eigen::VectorXd>& W_tilde,
                                            const FollowerSolution& nu_tilde,
                                            double tol = 1e-9);

// Per-lemma slack report for a pair of follower solutions under one policy.
struct BoundsReport {
  double tv_upper_slack = 0.0;        // min over (h,s) of RHS - LHS
  double tv_lower1_slack = 0.0;
  double tv_lower2_slack = 0.0;
  double hellinger_lower_slack = 0.0;
  double kl_upper_slack = 0.0;
  double a_diff_identity_max_err = 0.0;  // myopic-only identity, else NaN
  double hessian_sandwich_slack = 0.0;
  bool ok = false;
};
BoundsReport check_response_bounds(const MarkovGame& game, const LeaderPolicy& policy,
                                   const FollowerSolution& sol,
                                   const FollowerSolution& sol_tilde,
                                   std::uint64_t seed, double tol = 1e-9);

// Fraction of `reps` replications in which theta* passes the exact sublevel
// test at beta(delta).
struct CoverageSpec {
  int T = 200;
  int reps = 100;
  double delta = 0.1;
  double beta_override = -1.0;  // <=0: default_beta_linear
  double c_beta = 1.0;
  int policy_mesh = 1;
};
double empirical_coverage(const MarkovGame& game, const LinearGameParams& params,
                          const CoverageSpec& spec, std::uint64_t seed);

// Central finite differences (step 1e-5) against the analytic gradient;
// returns the max component error.
double grad_check_nll(const Eigen::VectorXd& theta, const ChoiceData& data,
                      double step = 1e-5);

// One row of the verify battery.
struct CheckResult {
  std::string name;
  bool passed = false;
  double slack = 0.0;   // worst margin observed (negative = violation)
  double seconds = 0.0;
  std::string detail;
};

// Runs the full lemma battery at the given instance counts; deterministic for
// a given seed.
std::vector<CheckResult> run_verify_battery(std::uint64_t seed, int instances_small,
                                            int instances_large);

// JUnit-style XML for CI consumption.
std::string to_junit_xml(const std::vector<CheckResult>& results);

// Regularized upper incomplete gamma Q(a, x), used for chi-square p-values.
double gamma_q(double a, double x);
double chi_square_pvalue(double stat, int dof);

}  // namespace qse
