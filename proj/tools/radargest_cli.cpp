// Command-line front end over the C API. Flags are generated from each
// command's default configuration, so --help always shows the real defaults.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "radargest/radargest.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string> kCommandHelp = {
    {"simulate", "Generate a synthetic paired radar/skeleton dataset"},
    {"preprocess", "Turn raw radar cubes into 64-point clouds (pointcloud.jsonl)"},
    {"train-ae", "Stage 1: train T-net, encoder and skeleton decoder on paired frames"},
    {"train-cls", "Stage 2: train the gesture classifier on a stage-1 encoder"},
    {"train-baseline", "Train the radar-only classifier from random initialisation"},
    {"eval", "Score a classifier checkpoint on an eval split"},
    {"compare", "Merge per-epoch accuracy curves of several runs into one CSV"},
    {"triangulate", "Match multi-view 2D keypoints and triangulate 3D skeletons"},
    {"gradcheck", "Finite-difference gradient check of every network"},
};

const std::map<std::string, std::string> kKeyHelp = {
    {"out", "Output path"},
    {"in", "Raw dataset directory"},
    {"data", "Preprocessed dataset root (or, for eval, a split directory)"},
    {"seed", "Seed for every stochastic component"},
    {"threads", "Worker threads; results do not depend on this"},
    {"train_per_class", "Training recordings per gesture class"},
    {"eval_per_class", "Evaluation recordings per gesture class"},
    {"eval_clutter", "Static clutter reflectors added to eval recordings"},
    {"snr_db", "Per-sample SNR of the strongest scatterer"},
    {"noise", "Add receiver noise"},
    {"top_bins", "Range-Doppler bins kept per frame"},
    {"n_points", "Points per cloud after padding/truncation"},
    {"epochs", "Training epochs"},
    {"batch", "Batch size (frames for train-ae, recordings otherwise)"},
    {"lr", "Adam learning rate"},
    {"frame_stride", "Use every n-th frame of each training recording"},
    {"stage1", "Stage-1 checkpoint directory (a classifier checkpoint warm-starts fine-tuning)"},
    {"freeze_encoder", "Keep the stage-1 T-net and encoder fixed"},
    {"ce_weight", "Cross-entropy loss weight"},
    {"triplet_weight", "Triplet loss weight"},
    {"margin", "Triplet margin"},
    {"eval_curve", "Score the eval split after every epoch (clouds only)"},
    {"checkpoint", "Checkpoint directory"},
    {"confusion_out", "Write the confusion matrix CSV here"},
    {"predictions_out", "Write per-recording predictions CSV here"},
    {"runs", "Run as NAME=CHECKPOINT, repeatable"},
    {"rig", "Camera rig JSON"},
    {"keypoints", "Multi-view keypoints JSONL (one frame per line)"},
    {"threshold_px", "Maximum mean epipolar distance for a cross-view match"},
    {"min_confidence", "Keypoints at or below this confidence are ignored"},
    {"samples", "Coordinates checked per network"},
    {"tolerance", "Maximum allowed relative error"},
};

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s) {
    if (c == '_' || c == '.') c = '-';
  }
  return s;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

int report_error(const std::string& code, const std::string& message, std::int64_t offset = -1) {
  std::cerr << "error code=" << code << " message=\"" << one_line(message) << '"';
  if (offset >= 0) std::cerr << " offset=" << offset;
  std::cerr << std::endl;
  return code == "usage" ? 2 : 1;
}

json default_config(const std::string& command) {
  char* text = nullptr;
  if (rg_default_config(command.c_str(), &text) != RG_OK) return json::object();
  json j = json::parse(text);
  rg_string_free(text);
  return j;
}

// One CLI option per config key; values are kept as strings and converted
// with the key's default type after parsing.
struct Binding {
  std::vector<std::string> path;
  json def;
  std::vector<std::string> values;
  CLI::Option* option = nullptr;
  bool negated = false;  // --no-<key> was given
  CLI::Option* negation = nullptr;
};

struct CommandState {
  std::string name;
  CLI::App* app = nullptr;
  std::vector<std::unique_ptr<Binding>> bindings;
  std::string report;
};

void bind_keys(CommandState& cmd, const json& defaults, const std::vector<std::string>& prefix) {
  for (auto it = defaults.begin(); it != defaults.end(); ++it) {
    std::vector<std::string> path = prefix;
    path.push_back(it.key());
    if (it.value().is_object()) {
      bind_keys(cmd, it.value(), path);
      continue;
    }
    auto b = std::make_unique<Binding>();
    b->path = path;
    b->def = it.value();
    std::string key;
    for (const auto& p : path) key += (key.empty() ? "" : "_") + p;
    const std::string flag = it.key() == "runs" ? "run" : flag_name(key);
    std::string help = kKeyHelp.count(it.key()) ? kKeyHelp.at(it.key()) : (prefix.empty() ? key : "Model: " + it.key());
    if (b->def.is_boolean()) {
      const std::string on_help = help + " (default: " + b->def.dump() + ")";
      const std::string off_help = "Disable --" + flag;
      b->option = cmd.app->add_flag("--" + flag)->description(on_help);
      b->negation = cmd.app->add_flag("--no-" + flag)->description(off_help);
      b->option->excludes(b->negation);
    } else if (b->def.is_array()) {
      b->option = cmd.app->add_option("--" + flag, b->values, help + " (default: " + b->def.dump() + ")");
      if (it.key() == "runs") {
        b->option->allow_extra_args(false)->type_name("NAME=DIR");
      } else {
        b->option->type_name("INT ...");
      }
    } else {
      std::string shown = b->def.is_null() ? "required" : "default: " + b->def.dump();
      b->option = cmd.app->add_option("--" + flag, b->values, help + " (" + shown + ")")->expected(1);
      b->option->type_name(b->def.is_string() ? "TEXT" : b->def.is_number_float() ? "FLOAT" : "INT");
    }
    cmd.bindings.push_back(std::move(b));
  }
}

json to_value(const Binding& b, const std::string& flag) {
  if (b.def.is_boolean()) return !b.negated;
  auto integer = [&](const std::string& s) -> json {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw CLI::ValidationError(flag, "expects an integer, got '" + s + "'");
    return v;
  };
  if (b.def.is_array()) {
    json arr = json::array();
    const bool ints = !b.def.empty() && b.def[0].is_number_integer();
    for (const auto& s : b.values) arr.push_back(ints ? integer(s) : json(s));
    return arr;
  }
  const std::string& s = b.values.back();
  if (b.def.is_null()) {
    if (s.empty() || s[0] == '-') throw CLI::ValidationError(flag, "expects a non-negative integer");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw CLI::ValidationError(flag, "expects a non-negative integer, got '" + s + "'");
    return v;
  }
  if (b.def.is_number_integer()) return integer(s);
  if (b.def.is_number()) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw CLI::ValidationError(flag, "expects a number, got '" + s + "'");
    return v;
  }
  return s;
}

json collect_overrides(const CommandState& cmd) {
  json out = json::object();
  for (const auto& bp : cmd.bindings) {
    Binding& b = *bp;
    const bool set = b.option->count() > 0 || (b.negation && b.negation->count() > 0);
    if (!set) continue;
    b.negated = b.negation && b.negation->count() > 0;
    json* slot = &out;
    for (std::size_t i = 0; i + 1 < b.path.size(); ++i) slot = &(*slot)[b.path[i]];
    (*slot)[b.path.back()] = to_value(b, b.option->get_name());
  }
  return out;
}

std::string default_report_path(const std::string& command, const json& cfg) {
  static const std::vector<std::string> dir_outputs = {"simulate", "preprocess", "train-ae", "train-cls",
                                                       "train-baseline"};
  for (const auto& c : dir_outputs) {
    if (c == command) return (fs::path(cfg.at("out").get<std::string>()) / "report.json").string();
  }
  return "report.json";
}

void write_report(const std::string& path, const json& report) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << report.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
}

void print_summary(const std::string& command, const json& r) {
  if (command == "eval") {
    std::cout << "accuracy " << r.at("accuracy").get<double>() << " on " << r.at("recordings") << " recordings\n";
  } else if (command == "gradcheck") {
    for (auto it = r.at("networks").begin(); it != r.at("networks").end(); ++it) {
      std::cout << it.key() << " max_rel_error " << it.value().at("max_rel_error").get<double>() << '\n';
    }
  } else if (r.contains("final_loss")) {
    std::cout << "final loss " << r.at("final_loss").get<double>();
    if (r.contains("final_eval_accuracy")) std::cout << ", eval accuracy " << r.at("final_eval_accuracy").get<double>();
    std::cout << ", checkpoint " << r.at("checkpoint_hash").get<std::string>() << '\n';
  } else if (r.contains("recordings")) {
    std::cout << "recordings " << r.at("recordings").dump() << '\n';
  } else if (r.contains("frames")) {
    std::cout << "frames " << r.at("frames") << ", joints triangulated " << r.at("joints_triangulated") << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar gesture recognition with cross-modal (radar + camera) learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rg_version());
  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "Suppress per-epoch progress on stderr");

  std::vector<std::unique_ptr<CommandState>> commands;
  for (const char* const* c = rg_commands(); *c; ++c) {
    auto cmd = std::make_unique<CommandState>();
    cmd->name = *c;
    cmd->app = app.add_subcommand(cmd->name, kCommandHelp.at(cmd->name));
    cmd->app->fallthrough(true);
    bind_keys(*cmd, default_config(cmd->name), {});
    cmd->app->add_option("--report", cmd->report,
                         "Report path (default: <out>/report.json for commands writing a directory, else report.json)");
    commands.push_back(std::move(cmd));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  CommandState* cmd = nullptr;
  for (auto& c : commands) {
    if (c->app->parsed()) cmd = c.get();
  }
  json overrides;
  try {
    overrides = collect_overrides(*cmd);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  json merged = default_config(cmd->name);
  merged.merge_patch(overrides);
  const std::string report_path = cmd->report.empty() ? default_report_path(cmd->name, merged) : cmd->report;

  auto log = [](const char* line, void* user) {
    if (!*static_cast<bool*>(user)) std::cerr << line << std::endl;
  };
  char* text = nullptr;
  const rg_status st = rg_run(cmd->name.c_str(), overrides.dump().c_str(), log, &quiet, &text);
  if (st != RG_OK) {
    const std::string message = rg_last_error();
    const std::int64_t offset = rg_last_error_offset();
    json failure = {{"command", cmd->name},
                    {"config", merged},
                    {"seed", merged.contains("seed") ? merged["seed"] : json(nullptr)},
                    {"error", {{"code", rg_status_name(st)}, {"message", message}}}};
    if (offset >= 0) failure["error"]["offset"] = offset;
    try {
      write_report(report_path, failure);
    } catch (const std::exception&) {
      // The error line below is the primary signal.
    }
    return report_error(rg_status_name(st), message, offset);
  }
  const json report = json::parse(text);
  rg_string_free(text);
  try {
    write_report(report_path, report);
  } catch (const std::exception& e) {
    return report_error("io", e.what());
  }
  print_summary(cmd->name, report);
  if (cmd->name == "gradcheck" && !report.at("pass").get<bool>()) {
    std::string worst;
    for (auto it = report.at("networks").begin(); it != report.at("networks").end(); ++it) {
      if (it.value().at("max_rel_error").get<double>() >= merged.at("tolerance").get<double>()) {
        worst += (worst.empty() ? "" : ",") + it.key();
      }
    }
    return report_error("numeric", "gradient check above tolerance for " + worst);
  }
  return 0;
}
