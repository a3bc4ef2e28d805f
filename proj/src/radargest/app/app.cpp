#include "radargest/app/app.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "radargest/common/alloc.hpp"
#include "radargest/common/error.hpp"
#include "radargest/gnn/gnn.hpp"
#include "radargest/multiview_geom/multiview_geom.hpp"
#include "radargest/tensor/checkpoint.hpp"
#include "radargest/training/dataset.hpp"

namespace radargest::app {

namespace fs = std::filesystem;
using namespace radargest::training;
using tensor::ParamStore;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

namespace {

constexpr const char* kCheckpointFormat = "radargest-model";

json stage1_defaults() {
  return {{"data", "processed"}, {"out", "models/autoencoder"}, {"epochs", 40},   {"batch", 32},
          {"lr", 1e-3},          {"seed", nullptr},              {"frame_stride", 1}, {"threads", 1},
          {"model", model_config_json({})}};
}

json stage2_defaults(const std::string& out) {
  return {{"data", "processed"}, {"out", out},          {"epochs", 40},      {"batch", 16},
          {"lr", 1e-3},          {"seed", nullptr},     {"ce_weight", 1.0},  {"triplet_weight", 1.0},
          {"margin", 0.2},       {"threads", 1},        {"eval_curve", true}};
}

const std::map<std::string, json>& defaults_table() {
  static const std::map<std::string, json> table = [] {
    std::map<std::string, json> t;
    t["simulate"] = {{"out", "data"},       {"seed", nullptr}, {"train_per_class", 200}, {"eval_per_class", 50},
                     {"eval_clutter", 2},   {"snr_db", 20.0},  {"noise", true},          {"threads", 1}};
    t["preprocess"] = {{"in", "data"}, {"out", "processed"}, {"top_bins", 25}, {"n_points", 64}, {"threads", 1}};
    t["train-ae"] = stage1_defaults();
    json cls = stage2_defaults("models/classifier");
    cls["stage1"] = "models/autoencoder";
    cls["freeze_encoder"] = true;
    t["train-cls"] = cls;
    json base = stage2_defaults("models/baseline");
    base["model"] = model_config_json({});
    t["train-baseline"] = base;
    t["eval"] = {{"checkpoint", "models/classifier"},
                 {"data", "processed"},
                 {"confusion_out", ""},
                 {"predictions_out", ""},
                 {"threads", 1}};
    t["compare"] = {{"runs", json::array()}, {"out", "compare.csv"}};
    t["triangulate"] = {{"rig", "rig.json"},  {"keypoints", "keypoints.jsonl"}, {"out", "skeleton.jsonl"},
                        {"threshold_px", 20.0}, {"min_confidence", 0.0}};
    t["gradcheck"] = {{"seed", nullptr}, {"samples", 200}, {"tolerance", 1e-4}};
    return t;
  }();
  return table;
}

void merge_into(json& target, const json& overrides, const std::string& path) {
  if (!overrides.is_object()) fail(ErrorCode::kInvalidArgument, "config" + path + " must be a JSON object");
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    json& slot = target[it.key()];
    const json& v = it.value();
    if (slot.is_object()) {
      merge_into(slot, v, key);
      continue;
    }
    bool ok = false;
    if (slot.is_null()) {
      ok = v.is_null() || v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    } else if (slot.is_boolean()) {
      ok = v.is_boolean();
    } else if (slot.is_number_integer()) {
      ok = v.is_number_integer();
    } else if (slot.is_number()) {
      ok = v.is_number();
    } else if (slot.is_string()) {
      ok = v.is_string();
    } else if (slot.is_array()) {
      ok = v.is_array();
    }
    if (!ok) fail(ErrorCode::kInvalidArgument, "config key '" + key + "' has the wrong type: " + v.dump());
    slot = v;
  }
}

std::uint64_t require_seed(const json& cfg) {
  if (cfg.at("seed").is_null()) fail(ErrorCode::kInvalidArgument, "a seed is required (--seed)");
  return cfg.at("seed").get<std::uint64_t>();
}

int positive_int(const json& cfg, const char* key) {
  const auto v = cfg.at(key).get<std::int64_t>();
  if (v < 1 || v > (1 << 30)) fail(ErrorCode::kInvalidArgument, std::string(key) + " must be a positive integer");
  return static_cast<int>(v);
}

json curve_json(const std::vector<EpochLog>& curve) {
  json out = json::array();
  for (const auto& e : curve) {
    out.push_back({{"epoch", e.epoch},
                   {"loss", e.loss},
                   {"ce", e.ce},
                   {"triplet", e.triplet},
                   {"train_accuracy", e.train_accuracy},
                   {"eval_accuracy", e.eval_accuracy}});
  }
  return out;
}

std::vector<EpochLog> curve_from_json(const json& j) {
  std::vector<EpochLog> out;
  for (const auto& e : j) {
    EpochLog l;
    l.epoch = e.at("epoch").get<int>();
    l.loss = e.at("loss").get<double>();
    l.ce = e.value("ce", 0.0);
    l.triplet = e.value("triplet", 0.0);
    l.train_accuracy = e.value("train_accuracy", -1.0);
    l.eval_accuracy = e.value("eval_accuracy", -1.0);
    out.push_back(l);
  }
  return out;
}

std::string epoch_line(const std::string& stage, const EpochLog& e) {
  std::ostringstream os;
  os.precision(6);
  os << stage << " epoch " << e.epoch << " loss " << e.loss;
  if (e.train_accuracy >= 0) os << " train_acc " << e.train_accuracy;
  if (e.eval_accuracy >= 0) os << " eval_acc " << e.eval_accuracy;
  return os.str();
}

json checkpoint_metadata(const std::string& kind, const model::ModelConfig& mcfg, const json& train,
                         std::uint64_t seed, const std::vector<EpochLog>& curve) {
  return {{"kind", kind}, {"model", model_config_json(mcfg)}, {"train", train}, {"seed", seed},
          {"curve", curve_json(curve)}};
}

void save_run(const std::string& out, const ParamStore& params, const json& metadata,
              const std::vector<EpochLog>& curve) {
  fs::create_directories(out);
  tensor::save_checkpoint(out, params, metadata.dump());
  write_text_file((fs::path(out) / "curves.csv").string(), curves_csv(curve));
}

void check_parameters(const ParamStore& params, const ParamStore& reference, const std::string& what) {
  std::vector<std::string> missing;
  for (const auto& name : reference.names()) {
    if (!params.contains(name)) {
      missing.push_back(name);
    } else if (params.get(name).shape() != reference.get(name).shape()) {
      fail(ErrorCode::kFormat, what + ": parameter '" + name + "' has shape " +
                                   tensor::shape_string(params.get(name).shape()) + ", expected " +
                                   tensor::shape_string(reference.get(name).shape()));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail(ErrorCode::kFormat, what + " is missing parameters: " + list);
  }
}

std::vector<ProcessedRecording> load_eval_for_curve(const std::string& data, const json& cfg, int threads) {
  if (!cfg.at("eval_curve").get<bool>()) return {};
  DatasetReader reader(data);
  if (reader.ids(kEvalSplit).empty()) return {};
  return reader.load_split(kEvalSplit, false, threads);
}

Stage2Config stage2_config(const json& cfg, bool freeze) {
  Stage2Config s;
  s.epochs = positive_int(cfg, "epochs");
  s.batch = positive_int(cfg, "batch");
  s.lr = cfg.at("lr").get<double>();
  s.seed = require_seed(cfg);
  s.freeze_encoder = freeze;
  s.ce_weight = cfg.at("ce_weight").get<double>();
  s.triplet_weight = cfg.at("triplet_weight").get<double>();
  s.margin = cfg.at("margin").get<double>();
  s.threads = positive_int(cfg, "threads");
  s.validate();
  return s;
}

json stage2_train_echo(const Stage2Config& s) {
  return {{"epochs", s.epochs}, {"batch", s.batch},         {"lr", s.lr},
          {"seed", s.seed},     {"freeze_encoder", s.freeze_encoder}, {"ce_weight", s.ce_weight},
          {"triplet_weight", s.triplet_weight}, {"margin", s.margin}};
}

json stage2_report(json report, const std::string& out, const Stage2Result& r) {
  const EpochLog& last = r.curve.back();
  report["final_loss"] = last.loss;
  report["final_train_accuracy"] = last.train_accuracy;
  if (last.eval_accuracy >= 0) report["final_eval_accuracy"] = last.eval_accuracy;
  report["parameter_count"] = r.params.parameter_count();
  report["checkpoint_hash"] = tensor::checkpoint_hash(out);
  report["curve"] = curve_json(r.curve);
  return report;
}

json do_simulate(const json& cfg, json report) {
  DatasetSpec spec;
  spec.seed = require_seed(cfg);
  spec.train_per_class = positive_int(cfg, "train_per_class");
  spec.eval_per_class = positive_int(cfg, "eval_per_class");
  const auto clutter = cfg.at("eval_clutter").get<std::int64_t>();
  require(clutter >= 0 && clutter <= 1000, "eval_clutter must be between 0 and 1000");
  spec.eval_clutter = static_cast<int>(clutter);
  spec.noise.enabled = cfg.at("noise").get<bool>();
  spec.noise.snr_db = cfg.at("snr_db").get<double>();
  spec.validate();
  generate_dataset(cfg.at("out").get<std::string>(), spec, positive_int(cfg, "threads"));
  report["recordings"] = {{"train", split_size(spec, kTrainSplit)}, {"eval", split_size(spec, kEvalSplit)}};
  return report;
}

json do_preprocess(const json& cfg, json report) {
  PreprocessOptions opts;
  opts.top_bins = positive_int(cfg, "top_bins");
  opts.n_points = positive_int(cfg, "n_points");
  preprocess_dataset(cfg.at("in").get<std::string>(), cfg.at("out").get<std::string>(), opts,
                     positive_int(cfg, "threads"));
  DatasetReader reader(cfg.at("out").get<std::string>());
  report["recordings"] = {{"train", reader.ids(kTrainSplit).size()}, {"eval", reader.ids(kEvalSplit).size()}};
  return report;
}

json do_train_ae(const json& cfg, json report, const LogFn& log) {
  const model::ModelConfig mcfg = model_config_from_json(cfg.at("model"));
  Stage1Config s;
  s.epochs = positive_int(cfg, "epochs");
  s.batch = positive_int(cfg, "batch");
  s.lr = cfg.at("lr").get<double>();
  s.seed = require_seed(cfg);
  s.frame_stride = positive_int(cfg, "frame_stride");
  s.threads = positive_int(cfg, "threads");
  s.validate();
  const std::string data = cfg.at("data").get<std::string>();
  const auto train = DatasetReader(data).load_split(kTrainSplit, true, s.threads);
  require(!train.empty(), "no training recordings in '" + data + "'");
  const auto result = train_autoencoder(train, mcfg, s, [&](const EpochLog& e) {
    if (log) log(epoch_line("train-ae", e));
  });
  const json train_echo = {{"epochs", s.epochs}, {"batch", s.batch}, {"lr", s.lr}, {"seed", s.seed},
                           {"frame_stride", s.frame_stride}};
  const std::string out = cfg.at("out").get<std::string>();
  save_run(out, result.params, checkpoint_metadata("autoencoder", mcfg, train_echo, s.seed, result.curve),
           result.curve);
  report["final_loss"] = result.curve.back().loss;
  report["parameter_count"] = result.params.parameter_count();
  report["checkpoint_hash"] = tensor::checkpoint_hash(out);
  report["curve"] = curve_json(result.curve);
  return report;
}

json do_train_cls(const json& cfg, json report, const LogFn& log) {
  const tensor::Checkpoint stage1 = tensor::load_checkpoint(cfg.at("stage1").get<std::string>());
  const ModelInfo info = model_info(stage1.metadata_json);
  const Stage2Config s = stage2_config(cfg, cfg.at("freeze_encoder").get<bool>());
  const std::string data = cfg.at("data").get<std::string>();
  DatasetReader reader(data);
  const auto train = reader.load_split(kTrainSplit, false, s.threads);
  require(!train.empty(), "no training recordings in '" + data + "'");
  const auto eval = load_eval_for_curve(data, cfg, s.threads);
  const auto result = train_classifier(train, stage1.params, info.config, s, eval.empty() ? nullptr : &eval,
                                       [&](const EpochLog& e) {
                                         if (log) log(epoch_line("train-cls", e));
                                       });
  const std::string out = cfg.at("out").get<std::string>();
  save_run(out, result.params,
           checkpoint_metadata("classifier", info.config, stage2_train_echo(s), s.seed, result.curve), result.curve);
  report["stage1_hash"] = tensor::checkpoint_hash(cfg.at("stage1").get<std::string>());
  return stage2_report(std::move(report), out, result);
}

json do_train_baseline(const json& cfg, json report, const LogFn& log) {
  const model::ModelConfig mcfg = model_config_from_json(cfg.at("model"));
  const Stage2Config s = stage2_config(cfg, false);
  const std::string data = cfg.at("data").get<std::string>();
  DatasetReader reader(data);
  const auto train = reader.load_split(kTrainSplit, false, s.threads);
  require(!train.empty(), "no training recordings in '" + data + "'");
  const auto eval = load_eval_for_curve(data, cfg, s.threads);
  const auto result = train_baseline(train, mcfg, s, eval.empty() ? nullptr : &eval, [&](const EpochLog& e) {
    if (log) log(epoch_line("train-baseline", e));
  });
  const std::string out = cfg.at("out").get<std::string>();
  save_run(out, result.params, checkpoint_metadata("baseline", mcfg, stage2_train_echo(s), s.seed, result.curve),
           result.curve);
  return stage2_report(std::move(report), out, result);
}

json do_eval(const json& cfg, json report) {
  const std::string ckpt = cfg.at("checkpoint").get<std::string>();
  const tensor::Checkpoint cp = tensor::load_checkpoint(ckpt);
  const ModelInfo info = model_info(cp.metadata_json);
  if (info.kind != "classifier" && info.kind != "baseline") {
    fail(ErrorCode::kInvalidArgument, "checkpoint '" + ckpt + "' holds kind '" + info.kind + "'; eval needs a classifier");
  }
  check_parameters(cp.params,
                   model::init_params(info.config, 0,
                                      model::kPartTNet | model::kPartEncoder | model::kPartClassifier),
                   "checkpoint '" + ckpt + "'");
  const int threads = positive_int(cfg, "threads");
  const SplitLocation loc = locate_split(cfg.at("data").get<std::string>(), kEvalSplit);
  const auto recs = DatasetReader(loc.root).load_split(loc.split, false, threads);
  require(!recs.empty(), "no recordings in split '" + loc.split + "' of '" + loc.root + "'");
  const EvalReport r = evaluate(cp.params, info.config, recs, threads);

  if (const auto path = cfg.at("confusion_out").get<std::string>(); !path.empty()) {
    write_text_file(path, confusion_csv(r));
  }
  if (const auto path = cfg.at("predictions_out").get<std::string>(); !path.empty()) {
    std::ostringstream os;
    os << "id,label,prediction\n";
    for (std::size_t i = 0; i < r.ids.size(); ++i) {
      os << r.ids[i] << ',' << scene::gesture_name(scene::gesture_from_code(r.labels[i])) << ','
         << scene::gesture_name(scene::gesture_from_code(r.predictions[i])) << '\n';
    }
    write_text_file(path, os.str());
  }
  json names = json::array();
  json confusion = json::array();
  json counts = json::array();
  for (std::size_t c = 0; c < model::kClasses; ++c) {
    names.push_back(scene::gesture_name(scene::gesture_from_code(static_cast<int>(c))));
    confusion.push_back(r.confusion[c]);
    int n = 0;
    for (int v : r.confusion[c]) n += v;
    counts.push_back(n);
  }
  report["seed"] = info.seed;
  report["kind"] = info.kind;
  report["split"] = loc.split;
  report["recordings"] = recs.size();
  report["accuracy"] = r.accuracy;
  report["class_names"] = names;
  report["confusion"] = confusion;
  report["per_class_counts"] = counts;
  report["checkpoint_hash"] = tensor::checkpoint_hash(ckpt);
  return report;
}

json do_compare(const json& cfg, json report) {
  std::vector<RunCurve> runs;
  json sources = json::array();
  for (const auto& spec : cfg.at("runs")) {
    if (!spec.is_string()) fail(ErrorCode::kInvalidArgument, "compare runs must be strings NAME=CHECKPOINT");
    const std::string s = spec.get<std::string>();
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
      fail(ErrorCode::kInvalidArgument, "compare run '" + s + "' is not of the form NAME=CHECKPOINT");
    }
    const std::string dir = s.substr(eq + 1);
    const ModelInfo info = model_info(tensor::load_checkpoint(dir).metadata_json);
    runs.push_back({s.substr(0, eq), info.curve});
    sources.push_back({{"name", s.substr(0, eq)}, {"checkpoint", dir}, {"kind", info.kind}, {"seed", info.seed}});
  }
  if (runs.size() < 2) fail(ErrorCode::kInvalidArgument, "compare needs at least two runs");
  const std::string csv = compare_csv(runs);
  write_text_file(cfg.at("out").get<std::string>(), csv);
  std::size_t rows = 0;
  for (const auto& r : runs) rows = std::max(rows, r.curve.size());
  report["runs"] = sources;
  report["rows"] = rows;
  return report;
}

std::vector<std::vector<geom::PersonKeypoints>> parse_keypoint_line(const json& j) {
  std::vector<std::vector<geom::PersonKeypoints>> views;
  for (const auto& view : j.at("views")) {
    std::vector<geom::PersonKeypoints> persons;
    for (const auto& person : view) {
      if (!person.is_array() || person.size() != geom::kJointsPerPerson) {
        fail(ErrorCode::kFormat, "each person needs " + std::to_string(geom::kJointsPerPerson) + " keypoints");
      }
      geom::PersonKeypoints kps;
      for (std::size_t i = 0; i < person.size(); ++i) {
        const auto& k = person[i];
        if (!k.is_array() || k.size() != 3) fail(ErrorCode::kFormat, "keypoints are [u, v, confidence]");
        kps.push_back({k[0].get<double>(), k[1].get<double>(), k[2].get<double>(), static_cast<int>(i)});
      }
      persons.push_back(std::move(kps));
    }
    views.push_back(std::move(persons));
  }
  return views;
}

json do_triangulate(const json& cfg, json report) {
  const auto cams = geom::load_rig(cfg.at("rig").get<std::string>());
  require(cams.size() >= 2, "triangulation needs at least two cameras");
  const double threshold = cfg.at("threshold_px").get<double>();
  const double min_conf = cfg.at("min_confidence").get<double>();
  require(threshold > 0.0, "threshold_px must be positive");
  const std::string path = cfg.at("keypoints").get<std::string>();
  const std::string text = read_text_file(path);

  std::ostringstream out;
  out.precision(17);
  std::size_t frames = 0, joints_done = 0, frames_matched = 0;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string line = text.substr(line_start, line_end - line_start);
    const auto offset = static_cast<std::int64_t>(line_start);
    line_start = line_end + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::vector<geom::PersonKeypoints>> views;
    try {
      views = parse_keypoint_line(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kFormat, "malformed keypoint file '" + path + "': " + e.what(),
                  offset + static_cast<std::int64_t>(e.byte) - 1);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, "malformed keypoint file '" + path + "': " + e.what(), offset);
    } catch (const Error& e) {
      throw Error(e.code(), "malformed keypoint file '" + path + "': " + e.what(), offset);
    }
    if (views.size() != cams.size()) {
      throw Error(ErrorCode::kFormat,
                  "keypoint line has " + std::to_string(views.size()) + " views, the rig has " +
                      std::to_string(cams.size()),
                  offset);
    }
    ++frames;
    json skeleton = json::array();
    for (int j = 0; j < geom::kJointsPerPerson; ++j) skeleton.push_back(nullptr);
    if (!views[0].empty()) {
      const auto matches = geom::match_across_views(views, cams, threshold);
      // The reference person seen in the most views, then the lowest mean cost.
      int best = -1;
      std::size_t best_views = 0;
      double best_cost = 0.0;
      for (std::size_t p = 0; p < matches.size(); ++p) {
        std::size_t seen = 0;
        double cost = 0.0;
        for (std::size_t v = 1; v < cams.size(); ++v) {
          if (matches[p].person_in_view[v] >= 0) {
            ++seen;
            cost += matches[p].cost[v];
          }
        }
        if (seen == 0) continue;
        cost /= static_cast<double>(seen);
        if (best < 0 || seen > best_views || (seen == best_views && cost < best_cost)) {
          best = static_cast<int>(p);
          best_views = seen;
          best_cost = cost;
        }
      }
      if (best >= 0) {
        ++frames_matched;
        for (int j = 0; j < geom::kJointsPerPerson; ++j) {
          std::vector<geom::Observation> obs;
          for (std::size_t v = 0; v < cams.size(); ++v) {
            const int person = matches[static_cast<std::size_t>(best)].person_in_view[v];
            if (person < 0) continue;
            const auto& kp = views[v][static_cast<std::size_t>(person)][static_cast<std::size_t>(j)];
            if (kp.confidence <= min_conf) continue;
            obs.push_back({cams[v], Eigen::Vector2d(kp.u, kp.v)});
          }
          if (obs.size() < 2) continue;
          const Eigen::Vector3d p = geom::triangulate(obs);
          skeleton[static_cast<std::size_t>(j)] = {p.x(), p.y(), p.z()};
          ++joints_done;
        }
      }
    }
    out << skeleton.dump() << '\n';
  }
  write_text_file(cfg.at("out").get<std::string>(), out.str());
  report["frames"] = frames;
  report["frames_matched"] = frames_matched;
  report["joints_triangulated"] = joints_done;
  return report;
}

json do_gradcheck(const json& cfg, json report, const LogFn& log) {
  const std::uint64_t seed = require_seed(cfg);
  const auto samples = cfg.at("samples").get<std::int64_t>();
  require(samples >= 1, "samples must be positive");
  const double tol = cfg.at("tolerance").get<double>();
  json nets = json::object();
  bool pass = true;
  for (const auto& c : network_gradchecks(seed, static_cast<std::size_t>(samples))) {
    nets[c.name] = {{"max_rel_error", c.result.max_rel_error},
                    {"coordinates", c.result.coordinates},
                    {"worst_parameter", c.result.worst_parameter}};
    pass = pass && c.result.max_rel_error < tol;
    if (log) {
      std::ostringstream os;
      os << c.name << " max_rel_error " << c.result.max_rel_error;
      log(os.str());
    }
  }
  report["networks"] = nets;
  report["pass"] = pass;
  return report;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate", "preprocess", "train-ae",    "train-cls", "train-baseline",
                                                 "eval",     "compare",    "triangulate", "gradcheck"};
  return names;
}

bool is_stochastic(const std::string& command) {
  const json d = default_config(command);
  return d.contains("seed");
}

json default_config(const std::string& command) {
  const auto& t = defaults_table();
  const auto it = t.find(command);
  if (it == t.end()) fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
  return it->second;
}

json run(const std::string& command, const json& overrides, const LogFn& log) {
  tune_allocator();
  json cfg = default_config(command);
  merge_into(cfg, overrides.is_null() ? json::object() : overrides, "");
  json report = {{"command", command}, {"config", cfg}, {"seed", cfg.contains("seed") ? cfg["seed"] : json(nullptr)}};
  if (command == "simulate") return do_simulate(cfg, std::move(report));
  if (command == "preprocess") return do_preprocess(cfg, std::move(report));
  if (command == "train-ae") return do_train_ae(cfg, std::move(report), log);
  if (command == "train-cls") return do_train_cls(cfg, std::move(report), log);
  if (command == "train-baseline") return do_train_baseline(cfg, std::move(report), log);
  if (command == "eval") return do_eval(cfg, std::move(report));
  if (command == "compare") return do_compare(cfg, std::move(report));
  if (command == "triangulate") return do_triangulate(cfg, std::move(report));
  return do_gradcheck(cfg, std::move(report), log);
}

json model_config_json(const model::ModelConfig& c) {
  return {{"cloud_size", c.cloud_size},
          {"features", c.features},
          {"k", c.k},
          {"tnet_width", c.tnet_width},
          {"encoder_widths", c.encoder_widths},
          {"latent", c.latent},
          {"pseudo_point_features", c.pseudo_point_features},
          {"decoder_widths", c.decoder_widths},
          {"lstm_units", c.lstm_units},
          {"embedding", c.embedding},
          {"classes", c.classes},
          {"sequence", c.sequence},
          {"mask_padding", c.mask_padding},
          {"xyz_scale", c.xyz_scale},
          {"doppler_scale", c.doppler_scale}};
}

model::ModelConfig model_config_from_json(const json& j) {
  json full = model_config_json({});
  merge_into(full, j, "model");
  model::ModelConfig c;
  try {
    c.cloud_size = full.at("cloud_size").get<std::size_t>();
    c.features = full.at("features").get<std::size_t>();
    c.k = full.at("k").get<std::size_t>();
    c.tnet_width = full.at("tnet_width").get<std::size_t>();
    c.encoder_widths = full.at("encoder_widths").get<std::vector<std::size_t>>();
    c.latent = full.at("latent").get<std::size_t>();
    c.pseudo_point_features = full.at("pseudo_point_features").get<std::size_t>();
    c.decoder_widths = full.at("decoder_widths").get<std::vector<std::size_t>>();
    c.lstm_units = full.at("lstm_units").get<std::size_t>();
    c.embedding = full.at("embedding").get<std::size_t>();
    c.classes = full.at("classes").get<std::size_t>();
    c.sequence = full.at("sequence").get<std::size_t>();
    c.mask_padding = full.at("mask_padding").get<bool>();
    c.xyz_scale = full.at("xyz_scale").get<double>();
    c.doppler_scale = full.at("doppler_scale").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelInfo model_info(const std::string& metadata_json) {
  ModelInfo info;
  json j;
  try {
    j = json::parse(metadata_json);
    info.kind = j.at("kind").get<std::string>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.curve = curve_from_json(j.at("curve"));
    info.train_config = j.at("train");
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint metadata is incomplete: ") + e.what());
  }
  info.config = model_config_from_json(j.at("model"));
  return info;
}

SplitLocation locate_split(const std::string& dir, const std::string& default_split) {
  const fs::path p(dir);
  if (!fs::is_directory(p)) fail(ErrorCode::kIo, "data directory '" + dir + "' does not exist");
  if (fs::exists(p / "manifest.json")) return {p.string(), default_split};
  const fs::path canonical = fs::weakly_canonical(p);
  const std::string split = canonical.filename().string();
  if (split != kTrainSplit && split != kEvalSplit) {
    fail(ErrorCode::kInvalidArgument, "'" + dir + "' is neither a dataset root nor a train/eval split directory");
  }
  return {canonical.parent_path().string(), split};
}

namespace {

Tensor random_tensor(tensor::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

ParamStore jittered(ParamStore p, Rng& rng) {
  // Fresh initialisations contain exact zeros (T-net head, biases) that hide
  // whole gradient paths; a small perturbation exposes them.
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double& v : p.at(i).storage()) v += rng.normal(0.0, 0.05);
  }
  return p;
}

}  // namespace

std::vector<NetworkCheck> network_gradchecks(std::uint64_t seed, std::size_t samples) {
  std::vector<NetworkCheck> out;
  const model::ModelConfig mcfg;
  const std::size_t n = mcfg.cloud_size;
  tensor::GradcheckOptions opts;
  opts.samples = samples;
  opts.seed = seed;

  {
    Rng rng(seed, {0x67, 1});
    ParamStore params;
    gnn::TNetSpec spec;
    gnn::init_tnet(params, spec, rng);
    params = jittered(std::move(params), rng);
    const Tensor x = random_tensor({2 * n, mcfg.features}, rng);
    const Tensor target = random_tensor({2 * n, mcfg.features}, rng);
    auto fn = [&](const ParamStore& p, ParamStore* g) {
      Tape tape;
      auto o = gnn::input_transform(tape, p, spec, tape.constant(x), n);
      Var loss = tensor::mse_loss(o.points, tape.constant(target));
      if (g) tape.backward(loss, g);
      return loss.value().item();
    };
    out.push_back({"tnet", tensor::finite_diff_check(fn, params, opts)});
  }
  {
    Rng rng(seed, {0x67, 2});
    ParamStore params = jittered(model::init_params(mcfg, seed, model::kPartTNet | model::kPartEncoder), rng);
    const Tensor x = random_tensor({2 * n, mcfg.features}, rng);
    const Tensor target = random_tensor({2, mcfg.latent}, rng);
    auto fn = [&](const ParamStore& p, ParamStore* g) {
      Tape tape;
      Var z = model::encode(tape, p, mcfg, tape.constant(x));
      Var loss = tensor::mse_loss(z, tape.constant(target));
      if (g) tape.backward(loss, g);
      return loss.value().item();
    };
    out.push_back({"encoder", tensor::finite_diff_check(fn, params, opts)});
  }
  {
    Rng rng(seed, {0x67, 3});
    ParamStore params = jittered(
        model::init_params(mcfg, seed, model::kPartTNet | model::kPartEncoder | model::kPartDecoder), rng);
    const Tensor x = random_tensor({2 * n, mcfg.features}, rng);
    const Tensor target = random_tensor({2, model::kJoints, 3}, rng);
    auto fn = [&](const ParamStore& p, ParamStore* g) {
      Tape tape;
      auto o = model::forward_autoencoder(tape, p, mcfg, tape.constant(x), tape.constant(target));
      if (g) tape.backward(o.mse, g);
      return o.mse.value().item();
    };
    out.push_back({"autoencoder", tensor::finite_diff_check(fn, params, opts)});
  }
  const std::vector<std::uint32_t> labels = {0, 0, 1, 1};
  {
    Rng rng(seed, {0x67, 4});
    ParamStore params = jittered(model::init_params(mcfg, seed, model::kPartClassifier), rng);
    const Tensor z = random_tensor({labels.size(), mcfg.sequence, mcfg.latent}, rng);
    auto fn = [&](const ParamStore& p, ParamStore* g) {
      Tape tape;
      auto o = model::classify_sequence(tape, p, mcfg, tape.constant(z));
      Var loss = tensor::add(tensor::cross_entropy_loss(o.logits, labels),
                             tensor::batch_hard_triplet_loss(o.embedding, labels, 0.2));
      if (g) tape.backward(loss, g);
      return loss.value().item();
    };
    out.push_back({"sequence_classifier", tensor::finite_diff_check(fn, params, opts)});
  }
  {
    // Whole radar-only classifier; a short sequence keeps the many forward
    // passes affordable without changing the graph structure.
    model::ModelConfig short_cfg = mcfg;
    short_cfg.sequence = 4;
    Rng rng(seed, {0x67, 5});
    ParamStore params = jittered(
        model::init_params(short_cfg, seed, model::kPartTNet | model::kPartEncoder | model::kPartClassifier), rng);
    const Tensor x = random_tensor({labels.size() * short_cfg.sequence * n, mcfg.features}, rng);
    auto fn = [&](const ParamStore& p, ParamStore* g) {
      Tape tape;
      auto o = model::forward_full(tape, p, short_cfg, tape.constant(x));
      Var loss = tensor::add(tensor::cross_entropy_loss(o.logits, labels),
                             tensor::batch_hard_triplet_loss(o.embedding, labels, 0.2));
      if (g) tape.backward(loss, g);
      return loss.value().item();
    };
    out.push_back({"full_classifier", tensor::finite_diff_check(fn, params, opts)});
  }
  return out;
}

}  // namespace radargest::app
