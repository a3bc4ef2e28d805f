#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "radargest/radargest.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  rg_string_free(s);
  return out;
}

json run_ok(const std::string& command, const json& cfg, std::vector<std::string>* lines = nullptr) {
  char* report = nullptr;
  const rg_status st = rg_run(
      command.c_str(), cfg.dump().c_str(),
      [](const char* line, void* user) {
        if (user) static_cast<std::vector<std::string>*>(user)->push_back(line);
      },
      lines, &report);
  INFO(command << ": " << rg_last_error());
  REQUIRE(st == RG_OK);
  return json::parse(take(report));
}

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("radargest_capi_" + std::to_string(std::random_device{}()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Cleanup {
  ~Cleanup() {
    std::error_code ec;
    fs::remove_all(work(), ec);
  }
} cleanup;

std::string path(const std::string& name) { return (work() / name).string(); }

// Tiny dataset and models shared by the model tests.
void prepare_models() {
  static bool done = false;
  if (done) return;
  run_ok("simulate", {{"out", path("raw")}, {"seed", 3}, {"train_per_class", 2}, {"eval_per_class", 1}});
  run_ok("preprocess", {{"in", path("raw")}, {"out", path("proc")}});
  run_ok("train-ae", {{"data", path("proc")}, {"out", path("ae")}, {"seed", 1}, {"epochs", 1}, {"frame_stride", 10}});
  run_ok("train-baseline",
         {{"data", path("proc")}, {"out", path("base")}, {"seed", 2}, {"epochs", 1}, {"batch", 10}});
  done = true;
}

std::vector<std::string> read_lines(const std::string& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(rg_status_name(RG_OK)) == "ok");
  CHECK(std::string(rg_status_name(RG_ERR_FORMAT)) == "format");
  CHECK(std::string(rg_status_name(RG_ERR_INVALID_ARGUMENT)) == "invalid_argument");
  CHECK(std::string(rg_version()).size() > 0);
  rg_string_free(nullptr);
}

TEST_CASE("command list and default configurations") {
  std::vector<std::string> names;
  for (const char* const* c = rg_commands(); *c; ++c) names.push_back(*c);
  CHECK(names.size() == 9);
  CHECK(names.front() == "simulate");
  for (const auto& n : names) {
    char* cfg = nullptr;
    REQUIRE(rg_default_config(n.c_str(), &cfg) == RG_OK);
    CHECK(json::parse(take(cfg)).is_object());
  }
  char* cfg = nullptr;
  CHECK(rg_default_config("bogus", &cfg) == RG_ERR_INVALID_ARGUMENT);
  CHECK(std::string(rg_last_error()).find("bogus") != std::string::npos);
}

TEST_CASE("run rejects bad input with a status and message") {
  char* report = nullptr;
  CHECK(rg_run("simulate", "{\"out\": \"x\"}", nullptr, nullptr, &report) == RG_ERR_INVALID_ARGUMENT);
  CHECK(std::string(rg_last_error()).find("seed") != std::string::npos);
  CHECK(rg_run("simulate", "{\"sed\": 1}", nullptr, nullptr, &report) == RG_ERR_INVALID_ARGUMENT);
  CHECK(rg_run("simulate", "{not json", nullptr, nullptr, &report) != RG_OK);
  CHECK(rg_run(nullptr, "{}", nullptr, nullptr, &report) == RG_ERR_INVALID_ARGUMENT);
  CHECK(rg_run("simulate", "{}", nullptr, nullptr, nullptr) == RG_ERR_INVALID_ARGUMENT);
  CHECK(report == nullptr);
}

TEST_CASE("report echoes configuration and seed; progress lines arrive per epoch") {
  prepare_models();
  std::vector<std::string> lines;
  const json r = run_ok("train-baseline",
                        {{"data", path("proc")}, {"out", path("base2")}, {"seed", 2}, {"epochs", 2}, {"batch", 10}},
                        &lines);
  CHECK(r["seed"] == 2);
  CHECK(r["config"]["epochs"] == 2);
  CHECK(r["config"].contains("margin"));
  CHECK(lines.size() == 2);
  const json again = run_ok("train-baseline",
                            {{"data", path("proc")}, {"out", path("base3")}, {"seed", 2}, {"epochs", 2}, {"batch", 10}});
  CHECK(again["checkpoint_hash"] == r["checkpoint_hash"]);
}

TEST_CASE("model handles: metadata, classification and reconstruction") {
  prepare_models();
  rg_model* base = nullptr;
  REQUIRE(rg_model_open(path("base").c_str(), &base) == RG_OK);
  CHECK(std::string(rg_model_kind(base)) == "baseline");
  CHECK(rg_model_seed(base) == 2);
  CHECK(rg_model_parameter_count(base) > 0);

  // Classification through the handle agrees with the eval command.
  const json ev = run_ok("eval", {{"checkpoint", path("base")},
                                  {"data", path("proc")},
                                  {"predictions_out", path("pred.csv")}});
  std::map<std::string, std::string> predicted;
  const auto pred_lines = read_lines(path("pred.csv"));
  REQUIRE(pred_lines.size() == 6);
  for (std::size_t i = 1; i < pred_lines.size(); ++i) {
    const auto& l = pred_lines[i];
    predicted[l.substr(0, l.find(','))] = l.substr(l.rfind(',') + 1);
  }
  const std::vector<std::string> names = ev["class_names"].get<std::vector<std::string>>();
  for (const auto& [id, name] : predicted) {
    std::vector<double> points;
    std::vector<std::int32_t> valid;
    for (const auto& line : read_lines(path("proc") + "/eval/" + id + "/pointcloud.jsonl")) {
      const json j = json::parse(line);
      for (const auto& p : j["points"])
        for (const auto& v : p) points.push_back(v.get<double>());
      valid.push_back(j["valid_count"].get<std::int32_t>());
    }
    double logits[5];
    std::int32_t label = -1;
    REQUIRE(rg_model_classify(base, points.data(), valid.data(), valid.size(), logits, 5, &label) == RG_OK);
    CHECK(names.at(static_cast<std::size_t>(label)) == name);
    for (double v : logits) CHECK(std::isfinite(v));
    CHECK(rg_model_classify(base, points.data(), valid.data(), valid.size() - 1, logits, 5, &label) == RG_ERR_SHAPE);
    CHECK(rg_model_classify(base, points.data(), valid.data(), valid.size(), logits, 4, &label) == RG_ERR_SHAPE);
    double joints[51];
    CHECK(rg_model_reconstruct(base, points.data(), valid[0], joints) == RG_ERR_STATE);
  }
  rg_model_close(base);

  rg_model* ae = nullptr;
  REQUIRE(rg_model_open(path("ae").c_str(), &ae) == RG_OK);
  CHECK(std::string(rg_model_kind(ae)) == "autoencoder");
  std::vector<double> cloud(64 * 5, 0.0);
  for (int i = 0; i < 20; ++i) {
    cloud[i * 5 + 0] = 0.1 * i - 1.0;
    cloud[i * 5 + 1] = 1.5;
    cloud[i * 5 + 2] = 0.02 * i;
    cloud[i * 5 + 4] = 1.0 + i;
  }
  double joints[51], joints2[51];
  REQUIRE(rg_model_reconstruct(ae, cloud.data(), 20, joints) == RG_OK);
  REQUIRE(rg_model_reconstruct(ae, cloud.data(), 20, joints2) == RG_OK);
  for (int i = 0; i < 51; ++i) {
    CHECK(std::isfinite(joints[i]));
    CHECK(joints[i] == joints2[i]);
  }
  double logits[5];
  std::int32_t label = 0;
  std::vector<std::int32_t> valid(30, 20);
  std::vector<double> seq(30 * 64 * 5, 0.0);
  CHECK(rg_model_classify(ae, seq.data(), valid.data(), 30, logits, 5, &label) == RG_ERR_STATE);
  rg_model_close(ae);
  rg_model_close(nullptr);

  rg_model* missing = nullptr;
  CHECK(rg_model_open(path("nowhere").c_str(), &missing) == RG_ERR_IO);
  CHECK(missing == nullptr);
}

TEST_CASE("rig handles project and triangulate") {
  // Two cameras 1 m apart looking down +y.
  const json cam_a = {{"intrinsics", {800, 0, 640, 0, 800, 360, 0, 0, 1}},
                      {"rotation", {1, 0, 0, 0, 0, -1, 0, 1, 0}},
                      {"translation", {0.5, 0, 0}}};
  json cam_b = cam_a;
  cam_b["translation"] = {-0.5, 0, 0};
  {
    std::ofstream out(path("rig.json"));
    out << json::array({cam_a, cam_b}).dump();
  }
  rg_rig* rig = nullptr;
  REQUIRE(rg_rig_load(path("rig.json").c_str(), &rig) == RG_OK);
  CHECK(rg_rig_cameras(rig) == 2);
  const double point[3] = {0.2, 3.0, -0.1};
  double uv[4];
  REQUIRE(rg_rig_project(rig, 0, point, uv) == RG_OK);
  REQUIRE(rg_rig_project(rig, 1, point, uv + 2) == RG_OK);
  // Camera 0 sits at x = -0.5, so the point appears right of centre.
  CHECK(uv[0] > 640);
  CHECK(uv[1] == doctest::Approx(uv[3]).epsilon(1e-12));
  const std::size_t views[2] = {0, 1};
  double xyz[3];
  REQUIRE(rg_rig_triangulate(rig, views, uv, 2, xyz) == RG_OK);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(xyz[i] - point[i]) < 1e-9);
  CHECK(rg_rig_project(rig, 2, point, uv) == RG_ERR_INVALID_ARGUMENT);
  CHECK(rg_rig_triangulate(rig, views, uv, 1, xyz) == RG_ERR_INVALID_ARGUMENT);
  rg_rig_close(rig);

  {
    std::ofstream out(path("bad_rig.json"));
    out << "[{\"intrinsics\": [1, 2,";
  }
  rg_rig* bad = nullptr;
  CHECK(rg_rig_load(path("bad_rig.json").c_str(), &bad) == RG_ERR_FORMAT);
  CHECK(bad == nullptr);
  CHECK(rg_last_error_offset() >= 0);
}
