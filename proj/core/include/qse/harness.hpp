#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qse/online.hpp"
#include "qse/serialization.hpp"

namespace qse {

// Draws a fresh leader policy per episode. Episode index is mixed into the
// seed so sweeps stay reproducible.
using PolicySampler = std::function<LeaderPolicy(std::uint64_t episode_seed)>;

// Uniform over the deterministic prescription grid at every (h, s); the
// default diverse behavior sampler for offline benchmarks.
PolicySampler uniform_deterministic_sampler(const GameDims& dims);
// Uniform over the full mesh grid at every (h, s).
PolicySampler uniform_grid_sampler(const GameDims& dims, int mesh);
// Announces the same fixed policy every episode (degenerate coverage).
PolicySampler fixed_policy_sampler(const LeaderPolicy& policy);

struct DatasetDiagnostics {
  std::vector<int> null_space_dims;  // per h, of Sigma_{h,D} at the MLE
  bool rank_deficient = false;
};

// T independent trajectories, a fresh sampled policy each episode; data
// compliance holds because the simulator is memoryless given (s, a, b).
Dataset generate_offline_dataset(const MarkovGame& game, const PolicySampler& sampler,
                                 int T, std::uint64_t seed);

// Rank diagnostics for the step covariances, flagging the single-policy
// degeneracy of the tabular embedding.
DatasetDiagnostics diagnose_dataset(const Dataset& data, const LinearGameParams& params,
                                    const GameDims& dims, double eta,
                                    double param_bound);

// Minimal TOML subset reader (flat tables, strings, numbers, booleans,
// arrays); produces the JSON mirror used everywhere downstream.
json toml_to_json(const std::string& toml_text);

struct ExperimentConfig {
  json raw;                         // fully-expanded config (self-describing)
  std::string algorithm;            // "pvi" | "ovi" | "bcp" | "pmle" | "golf" | "omle"
  Scheme scheme = Scheme::S3;
  std::vector<int> T_values;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  LearnerParams learner;
  std::string beta_mode;            // "numeric" | "paper-linear" | "paper-farsighted"
  double beta_numeric = -1.0;
  json game_spec;                   // {file: path} or generator spec
};

ExperimentConfig parse_experiment_config(const json& j, const std::string& out_dir);

struct RunOutcome {
  int T = 0;
  std::uint64_t seed = 0;
  double subopt = 0.0;
  double J_hat = 0.0;
  double J_of_pi_hat = 0.0;
  double J_star = 0.0;
  bool failed = false;
  std::string error;
  json extra;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::string aggregate_csv_path;
  std::string manifest_path;
  int failures = 0;
};

// Executes the sweep (T values x seeds) in a worker pool, writes per-run
// JSON, the aggregate CSV (median/IQR per T), and a manifest with content
// hashes. Partial results are preserved on per-run failure.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Plot-data emission: TSV (T, median, q25, q75) from the aggregate CSV plus
// per-trace (t, cum_regret) series when regret CSVs are present.
std::vector<std::string> emit_plots(const std::string& result_dir);

// Aggregation helper shared with tests: median/q25/q75 with midpoint
// interpolation.
struct Quartiles {
  double q25 = 0.0, median = 0.0, q75 = 0.0;
};
Quartiles quartiles(std::vector<double> values);

std::string regret_trace_csv(const RegretTrace& trace, Scheme scheme, double beta,
                             std::uint64_t seed);

}  // namespace qse
