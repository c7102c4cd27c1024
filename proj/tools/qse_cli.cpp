// qse: command line harness for quantal Stackelberg games.
//
// Subcommands: plan, respond, fit, offline, online, gen, verify, sweep,
// plotdata. Exit codes: 0 success, 2 config error, 3 numeric failure,
// 4 verification failure.

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "qse/harness.hpp"
#include "qse/oracle.hpp"
#include "qse/rng.hpp"

namespace fs = std::filesystem;
using namespace qse;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string out = "qse-out";
  std::string config;
  bool quiet = false;
};

void say(const GlobalOpts& g, const std::string& msg) {
  if (!g.quiet) std::cout << msg << "\n";
}

json load_config(const GlobalOpts& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this subcommand");
  std::string text = read_file(g.config);
  if (fs::path(g.config).extension() == ".toml") return toml_to_json(text);
  return json::parse(text);
}

MarkovGame game_from_cli(const json& spec, LinearGameParams* params) {
  if (spec.contains("file")) return load_game(spec["file"].get<std::string>(), params);
  GameDims dims{spec.value("S", 2), spec.value("A", 2), spec.value("B", 2),
                spec.value("H", 2)};
  double gamma = spec.value("gamma", 0.0), eta = spec.value("eta", 1.0);
  std::uint64_t seed = spec.value("seed", 1ull);
  if (spec.value("linear", false)) {
    RandomLinearSpec ls{dims, spec.value("d", 4), gamma, eta,
                        spec.value("reward_scale", 1.0)};
    LinearGame lg = make_random_linear_game(ls, seed);
    if (params) *params = lg.params;
    return lg.game;
  }
  std::optional<IdentificationConstraint> constraint;
  if (spec.contains("constraint_sum")) {
    IdentificationConstraint c;
    c.weight = Eigen::VectorXd::Ones(dims.num_follower_actions);
    c.level = spec["constraint_sum"].get<double>();
    constraint = c;
  }
  MarkovGame game = make_random_game(dims, gamma, eta, seed, constraint);
  if (params) *params = embed_linear(game);
  return game;
}

int cmd_plan(const GlobalOpts& g, const std::string& game_path, int mesh) {
  LinearGameParams params;
  MarkovGame game = load_game(game_path, &params);
  PrescriptionGrid grid = PrescriptionGrid::make(
      game.dims().num_leader_actions, game.dims().num_follower_actions, mesh);
  QseSolution sol = solve_qse_myopic(game, grid);
  fs::create_directories(g.out);
  write_file(g.out + "/qse_policy.json", policy_to_json(sol.policy).dump(2) + "\n");
  json summary{{"J_star", sol.value}, {"mesh", mesh}, {"grid_size", grid.size()}};
  write_file(g.out + "/qse_plan.json", summary.dump(2) + "\n");
  say(g, "J* = " + std::to_string(sol.value));
  return 0;
}

int cmd_respond(const GlobalOpts& g, const std::string& game_path,
                const std::string& policy_path) {
  MarkovGame game = load_game(game_path);
  LeaderPolicy policy = policy_from_json(json::parse(read_file(policy_path)));
  FollowerSolution sol = quantal_response(game, policy);
  json out;
  out["advantage_bound"] = sol.advantage_bound;
  out["Q"] = json::array();
  out["V"] = json::array();
  out["A"] = json::array();
  out["nu"] = json::array();
  for (int h = 0; h < game.dims().horizon; ++h) {
    auto mat = [](const Eigen::MatrixXd& m) {
      json rows = json::array();
      for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(row);
      }
      return rows;
    };
    out["Q"].push_back(mat(sol.Q[h]));
    out["A"].push_back(mat(sol.Adv[h]));
    out["nu"].push_back(mat(sol.Nu[h]));
    out["V"].push_back(std::vector<double>(sol.V[h].data(),
                                           sol.V[h].data() + sol.V[h].size()));
  }
  fs::create_directories(g.out);
  write_file(g.out + "/response.json", out.dump(2) + "\n");
  say(g, "wrote " + g.out + "/response.json");
  return 0;
}

int cmd_fit(const GlobalOpts& g, const std::string& game_path,
            const std::string& data_path, const std::string& policies_path,
            double beta_override, double c_beta, double delta) {
  LinearGameParams params;
  MarkovGame game = load_game(game_path, &params);
  Dataset data = load_dataset(data_path, policies_path);
  data.validate(game.dims());
  const GameDims& dims = game.dims();
  double eta = game.rationality();
  double b_a = advantage_bound(0.0, eta, dims.num_follower_actions, dims.horizon);
  json out;
  out["steps"] = json::array();
  for (int h = 0; h < dims.horizon; ++h) {
    ChoiceData slice = choice_slice(data, params, dims, h, eta);
    double beta = beta_override > 0.0
                      ? beta_override
                      : default_beta_linear(params.dim, dims.horizon, eta,
                                            data.size(), delta, c_beta);
    ConfidenceSet set = confidence_set(slice, beta, 64, params.param_bound,
                                       c_eta_constant(eta, b_a),
                                       derive_seed(g.seed, 10 + h));
    Eigen::MatrixXd sigma = covariance_data(set.center, slice, true);
    json step;
    step["h"] = h;
    step["beta"] = beta;
    step["nll_min"] = set.min_nll;
    step["theta_mle"] = std::vector<double>(set.center.data(),
                                            set.center.data() + set.center.size());
    step["sample_count"] = set.sample.size();
    step["null_space_dim"] = null_space_dim(sigma);
    json sample = json::array();
    for (const auto& th : set.sample) {
      sample.push_back(std::vector<double>(th.data(), th.data() + th.size()));
    }
    step["theta_sample"] = sample;
    out["steps"].push_back(step);
  }
  DatasetDiagnostics diag = diagnose_dataset(data, params, dims, eta,
                                             params.param_bound);
  out["rank_deficient"] = diag.rank_deficient;
  fs::create_directories(g.out);
  write_file(g.out + "/fit.json", out.dump(2) + "\n");
  say(g, "wrote " + g.out + "/fit.json");
  return 0;
}

int cmd_gen(const GlobalOpts& g, const json& spec, int T) {
  fs::create_directories(g.out);
  LinearGameParams params;
  MarkovGame game = game_from_cli(spec, &params);
  save_game(game, g.out + "/game.json", &params);
  say(g, "wrote " + g.out + "/game.json");
  if (T > 0) {
    Dataset data = generate_offline_dataset(
        game, uniform_deterministic_sampler(game.dims()), T, g.seed);
    save_dataset(data, g.out + "/dataset.jsonl", g.out + "/policies.json");
    say(g, "wrote " + g.out + "/dataset.jsonl (" + std::to_string(T) + " episodes)");
  }
  return 0;
}

int cmd_verify(const GlobalOpts& g, int small, int large) {
  std::vector<CheckResult> results = run_verify_battery(g.seed, small, large);
  fs::create_directories(g.out);
  write_file(g.out + "/verify.xml", to_junit_xml(results));
  bool all = true;
  std::cout << "check                         status   slack        seconds\n";
  for (const auto& r : results) {
    std::printf("%-28s  %-7s  %+.3e  %7.2f\n", r.name.c_str(),
                r.passed ? "pass" : "FAIL", r.slack, r.seconds);
    all = all && r.passed;
  }
  return all ? 0 : 4;
}

int cmd_offline(const GlobalOpts& g, const json& cfg) {
  LinearGameParams params;
  MarkovGame game = game_from_cli(cfg.at("game"), &params);
  const GameDims& dims = game.dims();
  LearnerParams lp;
  if (cfg.contains("learner")) {
    const json& l = cfg["learner"];
    lp.c1 = l.value("c1", 1.0);
    lp.c_beta = l.value("c_beta", 1.0);
    lp.delta = l.value("delta", 0.1);
    lp.sample_size = l.value("sample_size", 64);
    lp.mesh = l.value("mesh", 10);
    if (l.contains("beta") && l["beta"].is_number()) lp.beta = l["beta"].get<double>();
  }
  lp.param_bound = params.param_bound;
  int T = cfg.value("T", 100);
  PrescriptionGrid grid = PrescriptionGrid::make(dims.num_leader_actions,
                                                 dims.num_follower_actions, lp.mesh);
  Dataset data = generate_offline_dataset(game, uniform_deterministic_sampler(dims),
                                          T, g.seed);
  std::string algo = cfg.value("algorithm", "pvi");
  fs::create_directories(g.out);
  QseSolution ref = solve_qse_myopic(game, grid);
  json out{{"T", T}, {"seed", g.seed}, {"J_star", ref.value}};
  if (algo == "pvi") {
    Scheme scheme = scheme_from_name(cfg.value("scheme", "S3"));
    PessimisticEstimate est = mle_pvi(data, params, dims, game.init_dist(),
                                      game.rationality(), scheme, lp, grid, g.seed);
    out["scheme"] = scheme_name(scheme);
    out["beta"] = est.beta;
    out["c1"] = lp.c1;
    out["J_hat"] = est.W1_mean;
    out["J_of_pi_hat"] = evaluate_J(game, est.policy);
    out["subopt"] = ref.value - out["J_of_pi_hat"].get<double>();
    write_file(g.out + "/policy.json", policy_to_json(est.policy).dump(2) + "\n");
  } else {
    throw ConfigError("offline algorithms via CLI: pvi (use tests for bcp/pmle)");
  }
  write_file(g.out + "/offline.json", out.dump(2) + "\n");
  say(g, "subopt = " + std::to_string(out["subopt"].get<double>()));
  return 0;
}

int cmd_online(const GlobalOpts& g, const json& cfg) {
  LinearGameParams params;
  MarkovGame game = game_from_cli(cfg.at("game"), &params);
  const GameDims& dims = game.dims();
  LearnerParams lp;
  if (cfg.contains("learner")) {
    const json& l = cfg["learner"];
    lp.c1 = l.value("c1", 1.0);
    lp.c_beta = l.value("c_beta", 1.0);
    lp.delta = l.value("delta", 0.1);
    lp.sample_size = l.value("sample_size", 64);
    lp.mesh = l.value("mesh", 10);
    if (l.contains("beta") && l["beta"].is_number()) lp.beta = l["beta"].get<double>();
  }
  lp.param_bound = params.param_bound;
  int T = cfg.value("T", 200);
  PrescriptionGrid grid = PrescriptionGrid::make(dims.num_leader_actions,
                                                 dims.num_follower_actions, lp.mesh);
  QseSolution ref = solve_qse_myopic(game, grid);
  Scheme scheme = scheme_from_name(cfg.value("scheme", "S5"));
  OnlineEnv env(game, params, g.seed);
  RegretTrace trace = mle_ovi(
      env, T, scheme, lp, grid, g.seed,
      [&](const LeaderPolicy& pi) { return evaluate_J(game, pi); }, ref.value);
  fs::create_directories(g.out);
  write_file(g.out + "/trace.csv", regret_trace_csv(trace, scheme, lp.beta, g.seed));
  json manifest{{"scheme", scheme_name(scheme)},
                {"T", T},
                {"seed", g.seed},
                {"J_star", ref.value},
                {"cum_regret", trace.rows.back().cum_regret},
                {"game_hash", fnv1a64(game_to_json(game).dump())},
                {"version", "qse 0.1.0"}};
  manifest["config"] = cfg;
  write_file(g.out + "/run_manifest.json", manifest.dump(2) + "\n");
  say(g, "Reg(T) = " + std::to_string(trace.rows.back().cum_regret));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantal Stackelberg equilibrium toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // allow global flags after the subcommand
  GlobalOpts g;
  app.add_option("--seed", g.seed, "base RNG seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--config", g.config, "config file (.toml or .json)");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  auto* plan = app.add_subcommand("plan", "exact myopic QSE over the grid");
  std::string plan_game;
  int plan_mesh = 10;
  plan->add_option("--game", plan_game, "game JSON file")->required();
  plan->add_option("--mesh", plan_mesh, "prescription mesh");

  auto* respond = app.add_subcommand("respond", "quantal response for a policy");
  std::string resp_game, resp_policy;
  respond->add_option("--game", resp_game)->required();
  respond->add_option("--policy", resp_policy)->required();

  auto* fit = app.add_subcommand("fit", "MLE + confidence diagnostics");
  std::string fit_game, fit_data, fit_policies;
  double fit_beta = -1.0, fit_cbeta = 1.0, fit_delta = 0.1;
  fit->add_option("--game", fit_game)->required();
  fit->add_option("--data", fit_data)->required();
  fit->add_option("--policies", fit_policies)->required();
  fit->add_option("--beta", fit_beta, "numeric beta override");
  fit->add_option("--c-beta", fit_cbeta, "paper-linear beta multiplier");
  fit->add_option("--delta", fit_delta);

  auto* offline = app.add_subcommand("offline", "MLE-PVI from a generated dataset");
  auto* online = app.add_subcommand("online", "MLE-OVI episodic run");

  auto* gen = app.add_subcommand("gen", "games and datasets");
  int gen_T = 0;
  gen->add_option("--episodes", gen_T, "also sample a dataset of this size");

  auto* verify = app.add_subcommand("verify", "run the oracle battery");
  int verify_small = 100, verify_large = 1000;
  verify->add_option("--small", verify_small, "instance count for heavy checks");
  verify->add_option("--large", verify_large, "instance count for light checks");

  auto* sweep = app.add_subcommand("sweep", "config-driven experiment sweep");
  auto* plotdata = app.add_subcommand("plotdata", "emit plot-friendly TSVs");
  std::string plot_dir;
  plotdata->add_option("--dir", plot_dir, "result directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }
  try {
    if (plan->parsed()) return cmd_plan(g, plan_game, plan_mesh);
    if (respond->parsed()) return cmd_respond(g, resp_game, resp_policy);
    if (fit->parsed()) {
      return cmd_fit(g, fit_game, fit_data, fit_policies, fit_beta, fit_cbeta,
                     fit_delta);
    }
    if (gen->parsed()) return cmd_gen(g, load_config(g).value("game", json::object()), gen_T);
    if (verify->parsed()) return cmd_verify(g, verify_small, verify_large);
    if (offline->parsed()) return cmd_offline(g, load_config(g));
    if (online->parsed()) return cmd_online(g, load_config(g));
    if (sweep->parsed()) {
      ExperimentConfig cfg = parse_experiment_config(load_config(g), g.out);
      ExperimentResult res = run_experiment(cfg);
      say(g, "runs: " + std::to_string(res.runs.size()) +
                 ", failures: " + std::to_string(res.failures));
      return res.failures == static_cast<int>(res.runs.size()) && !res.runs.empty() ? 3 : 0;
    }
    if (plotdata->parsed()) {
      for (const auto& f : emit_plots(plot_dir)) say(g, "wrote " + f);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
