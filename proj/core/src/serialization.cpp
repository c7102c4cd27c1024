#include "qse/serialization.hpp"

#include <fstream>
#include <sstream>

namespace qse {

namespace {

json tensor4_to_json(const std::vector<double>& flat, const GameDims& d) {
  json out = json::array();
  for (int h = 0; h < d.horizon; ++h) {
    json jh = json::array();
    for (int s = 0; s < d.num_states; ++s) {
      json js = json::array();
      for (int a = 0; a < d.num_leader_actions; ++a) {
        json ja = json::array();
        for (int b = 0; b < d.num_follower_actions; ++b) {
          ja.push_back(flat[((static_cast<std::size_t>(h) * d.num_states + s) *
                                 d.num_leader_actions + a) * d.num_follower_actions + b]);
        }
        js.push_back(std::move(ja));
      }
      jh.push_back(std::move(js));
    }
    out.push_back(std::move(jh));
  }
  return out;
}

std::vector<double> tensor4_from_json(const json& j, const GameDims& d) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(d.horizon) * d.joint());
  for (const auto& jh : j) {
    for (const auto& js : jh) {
      for (const auto& ja : js) {
        for (const auto& v : ja) flat.push_back(v.get<double>());
      }
    }
  }
  return flat;
}

}  // namespace

json game_to_json(const MarkovGame& game) {
  const GameDims& d = game.dims();
  json j;
  j["dims"] = {{"S", d.num_states},
               {"A", d.num_leader_actions},
               {"B", d.num_follower_actions},
               {"H", d.horizon}};
  j["rho0"] = std::vector<double>(game.init_dist().data(),
                                  game.init_dist().data() + d.num_states);
  j["u"] = tensor4_to_json(game.leader_reward(), d);
  j["r"] = tensor4_to_json(game.follower_reward(), d);
  json P = json::array();
  for (int h = 0; h < d.horizon; ++h) {
    json jh = json::array();
    for (int s = 0; s < d.num_states; ++s) {
      json js = json::array();
      for (int a = 0; a < d.num_leader_actions; ++a) {
        json ja = json::array();
        for (int b = 0; b < d.num_follower_actions; ++b) {
          json jb = json::array();
          for (int s2 = 0; s2 < d.num_states; ++s2) jb.push_back(game.p(h, s, a, b, s2));
          ja.push_back(std::move(jb));
        }
        js.push_back(std::move(ja));
      }
      jh.push_back(std::move(js));
    }
    P.push_back(std::move(jh));
  }
  j["P"] = std::move(P);
  j["gamma"] = game.discount();
  j["eta"] = game.rationality();
  return j;
}

MarkovGame game_from_json(const json& j) {
  GameDims d{j.at("dims").at("S").get<int>(), j.at("dims").at("A").get<int>(),
             j.at("dims").at("B").get<int>(), j.at("dims").at("H").get<int>()};
  std::vector<double> rho = j.at("rho0").get<std::vector<double>>();
  Eigen::VectorXd rho0 = Eigen::Map<Eigen::VectorXd>(rho.data(), rho.size());
  std::vector<double> u = tensor4_from_json(j.at("u"), d);
  std::vector<double> r = tensor4_from_json(j.at("r"), d);
  std::vector<double> P;
  P.reserve(static_cast<std::size_t>(d.horizon) * d.joint() * d.num_states);
  for (const auto& jh : j.at("P")) {
    for (const auto& js : jh) {
      for (const auto& ja : js) {
        for (const auto& jb : ja) {
          for (const auto& v : jb) P.push_back(v.get<double>());
        }
      }
    }
  }
  return build_tabular_game(d, rho0, std::move(u), std::move(r), std::move(P),
                            j.at("gamma").get<double>(), j.at("eta").get<double>());
}

json linear_to_json(const LinearGameParams& params) {
  json j;
  j["d"] = params.dim;
  j["B_phi"] = params.feature_bound;
  j["B_Theta"] = params.param_bound;
  auto mat = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["phi"] = json::array();
  j["theta"] = json::array();
  j["vartheta"] = json::array();
  j["mu"] = json::array();
  for (std::size_t h = 0; h < params.phi.size(); ++h) {
    j["phi"].push_back(mat(params.phi[h]));
    j["theta"].push_back(vec(params.theta[h]));
    j["vartheta"].push_back(vec(params.vartheta[h]));
    j["mu"].push_back(mat(params.varpi[h]));
  }
  return j;
}

LinearGameParams linear_from_json(const json& j) {
  LinearGameParams params;
  params.dim = j.at("d").get<int>();
  params.feature_bound = j.value("B_phi", 1.0);
  params.param_bound = j.value("B_Theta", 1.0);
  auto mat = [](const json& rows) {
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < rows[i].size(); ++c) m(i, c) = rows[i][c].get<double>();
    }
    return m;
  };
  auto vec = [](const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
    return v;
  };
  for (const auto& m : j.at("phi")) params.phi.push_back(mat(m));
  for (const auto& v : j.at("theta")) params.theta.push_back(vec(v));
  for (const auto& v : j.at("vartheta")) params.vartheta.push_back(vec(v));
  for (const auto& m : j.at("mu")) params.varpi.push_back(mat(m));
  return params;
}

json policy_to_json(const LeaderPolicy& policy) {
  const GameDims& d = policy.dims();
  json j;
  j["dims"] = {{"S", d.num_states},
               {"A", d.num_leader_actions},
               {"B", d.num_follower_actions},
               {"H", d.horizon}};
  json pres = json::array();
  for (int h = 0; h < d.horizon; ++h) {
    json jh = json::array();
    for (int s = 0; s < d.num_states; ++s) {
      const Prescription& alpha = policy.at(h, s);
      json rows = json::array();
      for (int b = 0; b < d.num_follower_actions; ++b) {
        json row = json::array();
        for (int a = 0; a < d.num_leader_actions; ++a) row.push_back(alpha(b, a));
        rows.push_back(std::move(row));
      }
      jh.push_back(std::move(rows));
    }
    pres.push_back(std::move(jh));
  }
  j["prescriptions"] = std::move(pres);
  return j;
}

LeaderPolicy policy_from_json(const json& j) {
  GameDims d{j.at("dims").at("S").get<int>(), j.at("dims").at("A").get<int>(),
             j.at("dims").at("B").get<int>(), j.at("dims").at("H").get<int>()};
  std::vector<Prescription> pres;
  pres.reserve(static_cast<std::size_t>(d.horizon) * d.num_states);
  for (const auto& jh : j.at("prescriptions")) {
    for (const auto& jmat : jh) {
      Prescription alpha(d.num_follower_actions, d.num_leader_actions);
      for (int b = 0; b < d.num_follower_actions; ++b) {
        for (int a = 0; a < d.num_leader_actions; ++a) {
          alpha(b, a) = jmat[b][a].get<double>();
        }
      }
      pres.push_back(std::move(alpha));
    }
  }
  return LeaderPolicy(d, std::move(pres));
}

std::string dataset_to_jsonl(const Dataset& data) {
  std::ostringstream os;
  for (const auto& traj : data.trajectories) {
    json j;
    j["policy"] = traj.policy_id;
    json steps = json::array();
    for (const auto& st : traj.steps) {
      steps.push_back({{"s", st.s}, {"a", st.a}, {"b", st.b}, {"u", st.u}});
    }
    j["steps"] = std::move(steps);
    os << j.dump() << "\n";
  }
  return os.str();
}

std::string policies_to_json(const Dataset& data) {
  json j = json::object();
  for (std::size_t i = 0; i < data.policies.size(); ++i) {
    j[std::to_string(i)] = policy_to_json(data.policies[i]);
  }
  return j.dump();
}

Dataset dataset_from_jsonl(const std::string& jsonl, const std::string& policies_json) {
  Dataset data;
  json pols = json::parse(policies_json);
  data.policies.resize(pols.size());
  for (auto it = pols.begin(); it != pols.end(); ++it) {
    data.policies[std::stoul(it.key())] = policy_from_json(it.value());
  }
  std::istringstream is(jsonl);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Trajectory traj;
    traj.policy_id = j.at("policy").get<int>();
    for (const auto& st : j.at("steps")) {
      traj.steps.push_back(TrajStep{st.at("s").get<int>(), st.at("a").get<int>(),
                                    st.at("b").get<int>(), st.at("u").get<double>()});
    }
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << contents;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void save_game(const MarkovGame& game, const std::string& path,
               const LinearGameParams* linear) {
  json j = game_to_json(game);
  if (linear) j["linear"] = linear_to_json(*linear);
  write_file(path, j.dump(2) + "\n");
}

MarkovGame load_game(const std::string& path, LinearGameParams* linear_out) {
  json j = json::parse(read_file(path));
  if (linear_out && j.contains("linear")) {
    *linear_out = linear_from_json(j["linear"]);
  }
  return game_from_json(j);
}

void save_dataset(const Dataset& data, const std::string& jsonl_path,
                  const std::string& policies_path) {
  write_file(jsonl_path, dataset_to_jsonl(data));
  write_file(policies_path, policies_to_json(data));
}

Dataset load_dataset(const std::string& jsonl_path, const std::string& policies_path) {
  return dataset_from_jsonl(read_file(jsonl_path), read_file(policies_path));
}

}  // namespace qse
