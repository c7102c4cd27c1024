#include "qse/harness.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <future>
#include <iomanip>
#include <sstream>

#include "qse/oracle.hpp"
#include "qse/rng.hpp"

namespace fs = std::filesystem;

namespace qse {

PolicySampler uniform_deterministic_sampler(const GameDims& dims) {
  return [dims](std::uint64_t episode_seed) {
    auto rng = make_engine(episode_seed, 0x64657470ull);
    std::uniform_int_distribution<int> pick(0, dims.num_leader_actions - 1);
    std::vector<Prescription> pres(static_cast<std::size_t>(dims.horizon) * dims.num_states);
    for (auto& alpha : pres) {
      alpha = Prescription::Zero(dims.num_follower_actions, dims.num_leader_actions);
      for (int b = 0; b < dims.num_follower_actions; ++b) alpha(b, pick(rng)) = 1.0;
    }
    return LeaderPolicy(dims, std::move(pres));
  };
}

PolicySampler uniform_grid_sampler(const GameDims& dims, int mesh) {
  auto grid = std::make_shared<PrescriptionGrid>(
      PrescriptionGrid::make(dims.num_leader_actions, dims.num_follower_actions, mesh));
  return [dims, grid](std::uint64_t episode_seed) {
    auto rng = make_engine(episode_seed, 0x67726470ull);
    std::uniform_int_distribution<std::size_t> pick(0, grid->size() - 1);
    std::vector<Prescription> pres(static_cast<std::size_t>(dims.horizon) * dims.num_states);
    for (auto& alpha : pres) alpha = grid->at(pick(rng));
    return LeaderPolicy(dims, std::move(pres));
  };
}

PolicySampler fixed_policy_sampler(const LeaderPolicy& policy) {
  return [policy](std::uint64_t) { return policy; };
}

Dataset generate_offline_dataset(const MarkovGame& game, const PolicySampler& sampler,
                                 int T, std::uint64_t seed) {
  Dataset data;
  for (int t = 0; t < T; ++t) {
    LeaderPolicy policy = sampler(derive_seed(seed, 2 * t));
    FollowerSolution response = quantal_response(game, policy);
    Trajectory traj = sample_trajectory(game, policy, response,
                                        derive_seed(seed, 2 * t + 1));
    data.append(std::move(traj), std::move(policy));
  }
  return data;
}

DatasetDiagnostics diagnose_dataset(const Dataset& data, const LinearGameParams& params,
                                    const GameDims& dims, double eta,
                                    double param_bound) {
  DatasetDiagnostics diag;
  for (int h = 0; h < dims.horizon; ++h) {
    ChoiceData slice = choice_slice(data, params, dims, h, eta);
    FitResult fit = fit_mle_myopic(slice, param_bound);
    Eigen::MatrixXd sigma = covariance_data(fit.theta, slice, true);
    int nd = null_space_dim(sigma);
    diag.null_space_dims.push_back(nd);
    if (nd > 0) diag.rank_deficient = true;
  }
  return diag;
}

// ---------------------------------------------------------------------------
// minimal TOML subset -> JSON

namespace {

void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

json parse_toml_value(const std::string& raw) {
  std::string v = raw;
  // trim
  auto b = v.find_first_not_of(" \t");
  auto e = v.find_last_not_of(" \t");
  if (b == std::string::npos) throw ConfigError("empty TOML value");
  v = v.substr(b, e - b + 1);
  if (v.front() == '"') {
    auto close = v.rfind('"');
    if (close == 0) throw ConfigError("unterminated string: " + v);
    return v.substr(1, close - 1);
  }
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("unterminated array: " + v);
    json arr = json::array();
    std::string inner = v.substr(1, v.size() - 2);
    std::size_t depth = 0, start = 0;
    bool in_str = false;
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < inner.size(); ++i) {
      char c = inner[i];
      if (c == '"') in_str = !in_str;
      if (in_str) continue;
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        parts.push_back(inner.substr(start, i - start));
        start = i + 1;
      }
    }
    if (inner.find_first_not_of(" \t") != std::string::npos) {
      parts.push_back(inner.substr(start));
    }
    for (const auto& p : parts) {
      if (p.find_first_not_of(" \t") == std::string::npos) continue;
      arr.push_back(parse_toml_value(p));
    }
    return arr;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  // number: integer when it parses exactly, else double
  try {
    std::size_t pos = 0;
    if (v.find('.') == std::string::npos && v.find('e') == std::string::npos &&
        v.find('E') == std::string::npos) {
      long long iv = std::stoll(v, &pos);
      if (pos == v.size()) return iv;
    }
    double dv = std::stod(v, &pos);
    if (pos == v.size()) return dv;
  } catch (...) {
  }
  throw ConfigError("cannot parse TOML value: " + v);
}

}  // namespace

json toml_to_json(const std::string& toml_text) {
  json root = json::object();
  json* table = &root;
  std::istringstream is(toml_text);
  std::string line;
  while (std::getline(is, line)) {
    // strip comments outside strings
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line = line.substr(0, i);
        break;
      }
    }
    std::size_t i = 0;
    skip_ws(line, i);
    if (i >= line.size() || line[i] == '\r') continue;
    if (line[i] == '[') {
      auto close = line.find(']', i);
      if (close == std::string::npos) throw ConfigError("bad table header: " + line);
      std::string name = line.substr(i + 1, close - i - 1);
      table = &root;
      std::size_t start = 0;
      while (true) {
        auto dot = name.find('.', start);
        std::string part = name.substr(start, dot == std::string::npos
                                                  ? std::string::npos
                                                  : dot - start);
        table = &(*table)[part];
        if (!table->is_object()) *table = json::object();
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value: " + line);
    std::string key = line.substr(0, eq);
    auto kb = key.find_first_not_of(" \t");
    auto ke = key.find_last_not_of(" \t");
    key = key.substr(kb, ke - kb + 1);
    (*table)[key] = parse_toml_value(line.substr(eq + 1));
  }
  return root;
}

// ---------------------------------------------------------------------------
// experiment runner

ExperimentConfig parse_experiment_config(const json& j, const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.out_dir = out_dir;
  try {
    cfg.algorithm = j.at("algorithm").get<std::string>();
    if (j.contains("scheme")) cfg.scheme = scheme_from_name(j["scheme"].get<std::string>());
    for (const auto& t : j.at("sweep").at("T")) cfg.T_values.push_back(t.get<int>());
    for (const auto& s : j.at("sweep").at("seeds")) {
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    if (cfg.T_values.empty() || cfg.seeds.empty()) {
      throw ConfigError("sweep axes must be nonempty");
    }
    std::vector<std::uint64_t> sorted = cfg.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("sweep seeds must be distinct");
    }
    cfg.game_spec = j.at("game");
    if (j.contains("learner")) {
      const json& l = j["learner"];
      cfg.learner.c1 = l.value("c1", 1.0);
      cfg.learner.c_beta = l.value("c_beta", 1.0);
      cfg.learner.delta = l.value("delta", 0.1);
      cfg.learner.sample_size = l.value("sample_size", 64);
      cfg.learner.mesh = l.value("mesh", 10);
      cfg.learner.param_bound = l.value("param_bound", 1.0);
      if (l.contains("beta")) {
        if (l["beta"].is_string()) {
          cfg.beta_mode = l["beta"].get<std::string>();
        } else {
          cfg.beta_mode = "numeric";
          cfg.beta_numeric = l["beta"].get<double>();
          cfg.learner.beta = cfg.beta_numeric;
        }
      } else {
        cfg.beta_mode = "paper-linear";
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return cfg;
}

namespace {

MarkovGame game_from_spec(const json& spec, LinearGameParams* params_out) {
  if (spec.contains("file")) {
    return load_game(spec["file"].get<std::string>(), params_out);
  }
  GameDims dims{spec.value("S", 2), spec.value("A", 2), spec.value("B", 2),
                spec.value("H", 2)};
  std::uint64_t gseed = spec.value("seed", 1ull);
  double gamma = spec.value("gamma", 0.0), eta = spec.value("eta", 1.0);
  if (spec.value("linear", false)) {
    RandomLinearSpec ls{dims, spec.value("d", 4), gamma, eta,
                        spec.value("reward_scale", 1.0)};
    LinearGame lg = make_random_linear_game(ls, gseed);
    if (params_out) *params_out = lg.params;
    return lg.game;
  }
  MarkovGame game = make_random_game(dims, gamma, eta, gseed);
  if (params_out) *params_out = embed_linear(game);
  return game;
}

RunOutcome run_cell(const ExperimentConfig& cfg, int T, std::uint64_t seed) {
  RunOutcome out;
  out.T = T;
  out.seed = seed;
  try {
    LinearGameParams params;
    MarkovGame game = game_from_spec(cfg.game_spec, &params);
    const GameDims& dims = game.dims();
    LearnerParams lp = cfg.learner;
    lp.param_bound = std::max(lp.param_bound, params.param_bound);
    PrescriptionGrid grid = PrescriptionGrid::make(dims.num_leader_actions,
                                                   dims.num_follower_actions, lp.mesh);
    QseSolution ref = solve_qse_myopic(game, grid);
    out.J_star = ref.value;
    if (cfg.algorithm == "pvi") {
      Dataset data = generate_offline_dataset(game, uniform_deterministic_sampler(dims),
                                              T, seed);
      PessimisticEstimate est = mle_pvi(data, params, dims, game.init_dist(),
                                        game.rationality(), cfg.scheme, lp, grid, seed);
      out.J_hat = est.W1_mean;
      out.J_of_pi_hat = evaluate_J(game, est.policy);
      out.subopt = ref.value - out.J_of_pi_hat;
      out.extra["beta"] = est.beta;  // logged expansion of the beta formula
    } else if (cfg.algorithm == "ovi") {
      OnlineEnv env(game, params, seed);
      RegretTrace trace = mle_ovi(
          env, T, cfg.scheme, lp, grid, seed,
          [&](const LeaderPolicy& pi) { return evaluate_J(game, pi); }, ref.value);
      out.J_of_pi_hat = trace.rows.empty() ? 0.0 : trace.rows.back().J_pi;
      out.J_hat = out.J_of_pi_hat;
      out.subopt = trace.rows.empty() ? 0.0 : trace.rows.back().cum_regret / T;
      out.extra["cum_regret"] = trace.rows.empty() ? 0.0 : trace.rows.back().cum_regret;
      double beta_used = lp.beta > 0.0
                             ? lp.beta
                             : default_beta_linear(params.dim, dims.horizon,
                                                   game.rationality(), T, lp.delta,
                                                   lp.c_beta);
      out.extra["beta"] = beta_used;  // logged expansion of the beta formula
      out.extra["trace_csv"] = regret_trace_csv(trace, cfg.scheme, beta_used, seed);
    } else {
      throw ConfigError("run_experiment supports algorithms: pvi, ovi");
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Quartiles quartiles(std::vector<double> values) {
  Quartiles q;
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  auto at = [&](double frac) {
    double pos = frac * (values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double w = pos - lo;
    return values[lo] * (1.0 - w) + values[hi] * w;
  };
  q.q25 = at(0.25);
  q.median = at(0.5);
  q.q75 = at(0.75);
  return q;
}

std::string regret_trace_csv(const RegretTrace& trace, Scheme scheme, double beta,
                             std::uint64_t seed) {
  std::ostringstream os;
  os << "t,J_pi_t,subopt_t,cum_regret,beta,scheme,seed\n";
  for (const auto& row : trace.rows) {
    os << row.t << "," << format_double(row.J_pi) << "," << format_double(row.subopt)
       << "," << format_double(row.cum_regret) << "," << format_double(beta) << ","
       << scheme_name(scheme) << "," << seed << "\n";
  }
  return os.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  ExperimentResult result;

  std::vector<std::pair<int, std::uint64_t>> cells;
  for (int T : cfg.T_values) {
    for (std::uint64_t seed : cfg.seeds) cells.emplace_back(T, seed);
  }
  std::vector<std::future<RunOutcome>> futures;
  futures.reserve(cells.size());
  for (const auto& [T, seed] : cells) {
    futures.push_back(std::async(std::launch::async, run_cell, std::cref(cfg), T, seed));
  }
  for (auto& f : futures) result.runs.push_back(f.get());

  json manifest;
  manifest["config"] = cfg.raw;
  manifest["files"] = json::array();
  auto record = [&](const std::string& path, const std::string& contents) {
    write_file(path, contents);
    manifest["files"].push_back({{"path", path}, {"fnv1a64", fnv1a64(contents)}});
  };

  // per-run JSON, deterministic (T, seed) order
  for (const auto& run : result.runs) {
    json j;
    j["scheme"] = scheme_name(cfg.scheme);
    j["T"] = run.T;
    j["seed"] = run.seed;
    j["beta"] = cfg.beta_numeric;
    j["c1"] = cfg.learner.c1;
    j["J_hat"] = run.J_hat;
    j["J_of_pi_hat"] = run.J_of_pi_hat;
    j["J_star"] = run.J_star;
    j["subopt"] = run.subopt;
    j["failed"] = run.failed;
    if (run.failed) {
      j["error"] = run.error;
      ++result.failures;
    }
    for (auto it = run.extra.begin(); it != run.extra.end(); ++it) {
      if (it.key() == "trace_csv") continue;
      j[it.key()] = it.value();
    }
    std::ostringstream name;
    name << cfg.out_dir << "/run_T" << run.T << "_seed" << run.seed << ".json";
    record(name.str(), j.dump(2) + "\n");
    if (run.extra.contains("trace_csv")) {
      std::ostringstream tname;
      tname << cfg.out_dir << "/trace_T" << run.T << "_seed" << run.seed << ".csv";
      record(tname.str(), run.extra["trace_csv"].get<std::string>());
    }
  }

  // aggregate CSV: median/IQR of subopt per T
  std::ostringstream agg;
  agg << "T,n,median_subopt,q25_subopt,q75_subopt\n";
  for (int T : cfg.T_values) {
    std::vector<double> vals;
    for (const auto& run : result.runs) {
      if (run.T == T && !run.failed) vals.push_back(run.subopt);
    }
    Quartiles q = quartiles(vals);
    agg << T << "," << vals.size() << "," << format_double(q.median) << ","
        << format_double(q.q25) << "," << format_double(q.q75) << "\n";
  }
  result.aggregate_csv_path = cfg.out_dir + "/aggregate.csv";
  record(result.aggregate_csv_path, agg.str());

  manifest["runs_total"] = result.runs.size();
  manifest["runs_failed"] = result.failures;
  json failed_cells = json::array();
  for (const auto& run : result.runs) {
    if (run.failed) {
      failed_cells.push_back({{"T", run.T}, {"seed", run.seed}, {"error", run.error}});
    }
  }
  manifest["failures"] = std::move(failed_cells);
  result.manifest_path = cfg.out_dir + "/manifest.json";
  write_file(result.manifest_path, manifest.dump(2) + "\n");
  return result;
}

std::vector<std::string> emit_plots(const std::string& result_dir) {
  std::vector<std::string> written;
  fs::path agg = fs::path(result_dir) / "aggregate.csv";
  if (!fs::exists(agg)) throw MissingAggregate("no aggregate.csv in " + result_dir);
  std::istringstream is(read_file(agg.string()));
  std::string line;
  std::getline(is, line);  // header
  std::ostringstream tsv;
  tsv << "T\tmedian_subopt\tq25\tq75\n";
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string t, n, med, q25, q75;
    std::getline(ls, t, ',');
    std::getline(ls, n, ',');
    std::getline(ls, med, ',');
    std::getline(ls, q25, ',');
    std::getline(ls, q75, ',');
    tsv << t << "\t" << med << "\t" << q25 << "\t" << q75 << "\n";
  }
  std::string out = (fs::path(result_dir) / "subopt_vs_T.tsv").string();
  write_file(out, tsv.str());
  written.push_back(out);

  for (const auto& entry : fs::directory_iterator(result_dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("trace_", 0) != 0 || entry.path().extension() != ".csv") continue;
    std::istringstream ts(read_file(entry.path().string()));
    std::string tl;
    std::getline(ts, tl);
    std::ostringstream series;
    series << "t\tcum_regret\n";
    while (std::getline(ts, tl)) {
      if (tl.empty()) continue;
      std::istringstream ls(tl);
      std::string t, j, so, cr;
      std::getline(ls, t, ',');
      std::getline(ls, j, ',');
      std::getline(ls, so, ',');
      std::getline(ls, cr, ',');
      series << t << "\t" << cr << "\n";
    }
    std::string sp = (entry.path().parent_path() /
                      (entry.path().stem().string() + "_regret.tsv")).string();
    write_file(sp, series.str());
    written.push_back(sp);
  }
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace qse
