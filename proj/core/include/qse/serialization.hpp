#pragma once

#include <string>

#include "qse/game.hpp"
#include "qse/linear.hpp"
#include "qse/trajectory.hpp"

// single-header nlohmann/json from vendor/
#include "json.hpp"

namespace qse {

using json = nlohmann::json;

json game_to_json(const MarkovGame& game);
MarkovGame game_from_json(const json& j);
json linear_to_json(const LinearGameParams& params);
LinearGameParams linear_from_json(const json& j);

json policy_to_json(const LeaderPolicy& policy);
LeaderPolicy policy_from_json(const json& j);

// Datasets are JSON-lines (one trajectory per line) with a sidecar JSON file
// of announced policies keyed by episode index.
std::string dataset_to_jsonl(const Dataset& data);
std::string policies_to_json(const Dataset& data);
Dataset dataset_from_jsonl(const std::string& jsonl, const std::string& policies_json);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

void save_game(const MarkovGame& game, const std::string& path,
               const LinearGameParams* linear = nullptr);
MarkovGame load_game(const std::string& path, LinearGameParams* linear_out = nullptr);

void save_dataset(const Dataset& data, const std::string& jsonl_path,
                  const std::string& policies_path);
Dataset load_dataset(const std::string& jsonl_path, const std::string& policies_path);

}  // namespace qse
