#include "radargest/radargest.h"

#include <cstring>
#include <string>

#include "radargest/app/app.hpp"
#include "radargest/common/error.hpp"
#include "radargest/multiview_geom/multiview_geom.hpp"
#include "radargest/tensor/checkpoint.hpp"

using namespace radargest;
using nlohmann::json;

struct rg_model {
  tensor::ParamStore params;
  app::ModelInfo info;
};

struct rg_rig {
  std::vector<geom::CameraModel> cameras;
};

namespace {

thread_local std::string g_error;
thread_local std::int64_t g_offset = -1;

rg_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument: return RG_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return RG_ERR_IO;
    case ErrorCode::kFormat: return RG_ERR_FORMAT;
    case ErrorCode::kShape: return RG_ERR_SHAPE;
    case ErrorCode::kNumeric: return RG_ERR_NUMERIC;
    case ErrorCode::kState: return RG_ERR_STATE;
    case ErrorCode::kInternal: return RG_ERR_INTERNAL;
  }
  return RG_ERR_INTERNAL;
}

rg_status set_error(rg_status s, const std::string& message, std::int64_t offset = -1) {
  g_error = message;
  g_offset = offset;
  return s;
}

template <typename Fn>
rg_status guarded(Fn&& fn) {
  try {
    fn();
    return RG_OK;
  } catch (const Error& e) {
    return set_error(to_status(e.code()), e.what(), e.byte_offset());
  } catch (const json::parse_error& e) {
    return set_error(RG_ERR_FORMAT, e.what(), static_cast<std::int64_t>(e.byte) - 1);
  } catch (const json::exception& e) {
    return set_error(RG_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(RG_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RG_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

dsp::RadarPointCloud cloud_from(const double* p, int32_t valid, std::size_t n) {
  if (valid < 0 || static_cast<std::size_t>(valid) > n) {
    fail(ErrorCode::kInvalidArgument, "valid count must lie in [0, " + std::to_string(n) + "]");
  }
  dsp::RadarPointCloud c;
  c.valid_count = valid;
  c.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* q = p + i * dsp::kPointFeatures;
    c.points[i] = {q[0], q[1], q[2], q[3], q[4]};
  }
  return c;
}

}  // namespace

extern "C" {

const char* rg_status_name(rg_status status) {
  switch (status) {
    case RG_OK: return "ok";
    case RG_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RG_ERR_IO: return "io";
    case RG_ERR_FORMAT: return "format";
    case RG_ERR_SHAPE: return "shape";
    case RG_ERR_NUMERIC: return "numeric";
    case RG_ERR_STATE: return "state";
    case RG_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rg_last_error(void) { return g_error.c_str(); }
int64_t rg_last_error_offset(void) { return g_offset; }
const char* rg_version(void) { return "1.0.0"; }
void rg_string_free(char* s) { delete[] s; }

const char* const* rg_commands(void) {
  static const std::vector<const char*> names = [] {
    std::vector<const char*> v;
    for (const auto& n : app::command_names()) v.push_back(n.c_str());
    v.push_back(nullptr);
    return v;
  }();
  return names.data();
}

rg_status rg_default_config(const char* command, char** config_json) {
  return guarded([&] {
    need(command, "command");
    need(config_json, "config_json");
    *config_json = dup_string(app::default_config(command).dump(2));
  });
}

rg_status rg_run(const char* command, const char* config_json, rg_log_fn log, void* user, char** report_json) {
  return guarded([&] {
    need(command, "command");
    need(report_json, "report_json");
    *report_json = nullptr;
    json cfg = json::object();
    if (config_json && *config_json) {
      try {
        cfg = json::parse(config_json);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kFormat, std::string("config is not valid JSON: ") + e.what(),
                    static_cast<std::int64_t>(e.byte) - 1);
      }
    }
    app::LogFn fn;
    if (log) fn = [&](const std::string& line) { log(line.c_str(), user); };
    *report_json = dup_string(app::run(command, cfg, fn).dump(2));
  });
}

rg_status rg_model_open(const char* checkpoint_dir, rg_model** out) {
  return guarded([&] {
    need(checkpoint_dir, "checkpoint_dir");
    need(out, "out");
    *out = nullptr;
    tensor::Checkpoint cp = tensor::load_checkpoint(checkpoint_dir);
    auto m = std::make_unique<rg_model>();
    m->info = app::model_info(cp.metadata_json);
    m->params = std::move(cp.params);
    *out = m.release();
  });
}

void rg_model_close(rg_model* model) { delete model; }

const char* rg_model_kind(const rg_model* model) { return model ? model->info.kind.c_str() : ""; }
uint64_t rg_model_parameter_count(const rg_model* model) { return model ? model->params.parameter_count() : 0; }
uint64_t rg_model_seed(const rg_model* model) { return model ? model->info.seed : 0; }

rg_status rg_model_classify(const rg_model* model, const double* points, const int32_t* valid_counts, size_t frames,
                            double* logits, size_t classes, int32_t* label) {
  return guarded([&] {
    need(model, "model");
    need(points, "points");
    need(valid_counts, "valid_counts");
    need(label, "label");
    const auto& cfg = model->info.config;
    if (model->info.kind == "autoencoder") fail(ErrorCode::kState, "an autoencoder checkpoint cannot classify");
    if (frames != cfg.sequence) {
      fail(ErrorCode::kShape, "expected " + std::to_string(cfg.sequence) + " frames, got " + std::to_string(frames));
    }
    if (logits && classes != cfg.classes) {
      fail(ErrorCode::kShape, "logits buffer must hold " + std::to_string(cfg.classes) + " values");
    }
    training::ProcessedRecording rec;
    rec.id = "input";
    for (std::size_t t = 0; t < frames; ++t) {
      rec.clouds.push_back(
          cloud_from(points + t * cfg.cloud_size * dsp::kPointFeatures, valid_counts[t], cfg.cloud_size));
    }
    const tensor::Tensor z = training::encode_recording(model->params, cfg, rec);
    tensor::Tape tape;
    auto o = model::classify_sequence(tape, model->params, cfg,
                                      tape.constant(z.reshaped({1, cfg.sequence, cfg.latent})),
                                      model::Trainable{false, false, false, false});
    const tensor::Tensor& l = o.logits.value();
    std::size_t best = 0;
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      if (logits) logits[c] = l[c];
      if (l[c] > l[best]) best = c;
    }
    *label = static_cast<int32_t>(best);
  });
}

rg_status rg_model_reconstruct(const rg_model* model, const double* points, int32_t valid_count, double* joints) {
  return guarded([&] {
    need(model, "model");
    need(points, "points");
    need(joints, "joints");
    if (model->info.kind != "autoencoder") fail(ErrorCode::kState, "reconstruction needs an autoencoder checkpoint");
    const auto& cfg = model->info.config;
    const dsp::RadarPointCloud cloud = cloud_from(points, valid_count, cfg.cloud_size);
    const std::vector<int> valid{valid_count};
    tensor::Tape tape;
    const model::Trainable none{false, false, false, false};
    auto z = model::encode(tape, model->params, cfg, tape.constant(model::normalize_cloud(cloud, cfg)), &valid, none);
    auto s = model::decode(tape, model->params, cfg, z, none);
    std::memcpy(joints, s.value().data(), sizeof(double) * model::kJoints * 3);
  });
}

rg_status rg_rig_load(const char* path, rg_rig** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto r = std::make_unique<rg_rig>();
    r->cameras = geom::load_rig(path);
    *out = r.release();
  });
}

void rg_rig_close(rg_rig* rig) { delete rig; }
size_t rg_rig_cameras(const rg_rig* rig) { return rig ? rig->cameras.size() : 0; }

rg_status rg_rig_project(const rg_rig* rig, size_t view, const double* xyz, double* uv) {
  return guarded([&] {
    need(rig, "rig");
    need(xyz, "xyz");
    need(uv, "uv");
    if (view >= rig->cameras.size()) fail(ErrorCode::kInvalidArgument, "view index out of range");
    const Eigen::Vector2d p = geom::project(rig->cameras[view], Eigen::Vector3d(xyz[0], xyz[1], xyz[2]));
    uv[0] = p.x();
    uv[1] = p.y();
  });
}

rg_status rg_rig_triangulate(const rg_rig* rig, const size_t* views, const double* uv, size_t count, double* xyz) {
  return guarded([&] {
    need(rig, "rig");
    need(views, "views");
    need(uv, "uv");
    need(xyz, "xyz");
    std::vector<geom::Observation> obs;
    for (size_t i = 0; i < count; ++i) {
      if (views[i] >= rig->cameras.size()) fail(ErrorCode::kInvalidArgument, "view index out of range");
      obs.push_back({rig->cameras[views[i]], Eigen::Vector2d(uv[2 * i], uv[2 * i + 1])});
    }
    const Eigen::Vector3d p = geom::triangulate(obs);
    xyz[0] = p.x();
    xyz[1] = p.y();
    xyz[2] = p.z();
  });
}

}  // extern "C"
