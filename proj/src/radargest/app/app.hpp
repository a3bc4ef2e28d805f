#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radargest/model/model.hpp"
#include "radargest/tensor/gradcheck.hpp"
#include "radargest/training/trainer.hpp"

namespace radargest::app {

using nlohmann::json;

// Subcommands in CLI order.
const std::vector<std::string>& command_names();
bool is_stochastic(const std::string& command);

// Full default configuration of a command. Stochastic commands default
// "seed" to null, which run() rejects.
json default_config(const std::string& command);

// Progress lines (one per epoch) for long-running commands.
using LogFn = std::function<void(const std::string&)>;

// Merges `overrides` over the defaults, rejecting unknown keys, runs the
// command and returns its report: {"command", "config", "seed", ...results}.
json run(const std::string& command, const json& overrides, const LogFn& log = {});

json model_config_json(const model::ModelConfig& cfg);
model::ModelConfig model_config_from_json(const json& j);

// Checkpoint metadata of a trained model.
struct ModelInfo {
  std::string kind;  // autoencoder | classifier | baseline
  model::ModelConfig config;
  std::uint64_t seed = 0;
  std::vector<training::EpochLog> curve;
  json train_config;
};

ModelInfo model_info(const std::string& metadata_json);

// Per-network finite-difference checks used by `gradcheck`.
struct NetworkCheck {
  std::string name;
  tensor::GradcheckResult result;
};

std::vector<NetworkCheck> network_gradchecks(std::uint64_t seed, std::size_t samples);

// `dir` is either a dataset root (its eval split is used) or a split
// directory inside one.
struct SplitLocation {
  std::string root;
  std::string split;
};

SplitLocation locate_split(const std::string& dir, const std::string& default_split);

}  // namespace radargest::app
