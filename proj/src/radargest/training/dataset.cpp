#include "radargest/training/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "radargest/common/error.hpp"
#include "radargest/common/parallel.hpp"

namespace radargest::training {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

namespace {

constexpr std::uint64_t kEvalSeedOffset = 1ULL << 19;

[[noreturn]] void rethrow_json(const json::parse_error& e, const std::string& path, std::int64_t base = 0) {
  throw Error(ErrorCode::kFormat, path + ": " + e.what(), base + static_cast<std::int64_t>(e.byte > 0 ? e.byte - 1 : 0));
}

json parse_json(const std::string& text, const std::string& path, std::int64_t base = 0) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    rethrow_json(e, path, base);
  }
}

// Splits into lines, keeping each line's byte offset.
std::vector<std::pair<std::int64_t, std::string>> lines_of(const std::string& text) {
  std::vector<std::pair<std::int64_t, std::string>> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) out.emplace_back(static_cast<std::int64_t>(start), text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

json config_json(const scene::RadarConfig& c) {
  json rx = json::array();
  for (const auto& p : c.rx_positions) rx.push_back({p.x(), p.y(), p.z()});
  return {{"f_min", c.f_min}, {"f_max", c.f_max}, {"frame_rate", c.frame_rate}, {"nts", c.nts}, {"fs", c.fs},
          {"tc", c.tc},       {"pn", c.pn},       {"n_tx", c.n_tx},             {"n_rx", c.n_rx}, {"prt", c.prt},
          {"rx_positions", rx}};
}

scene::RadarConfig config_from_json(const json& j) {
  scene::RadarConfig c;
  c.f_min = j.at("f_min").get<double>();
  c.f_max = j.at("f_max").get<double>();
  c.frame_rate = j.at("frame_rate").get<double>();
  c.nts = j.at("nts").get<int>();
  c.fs = j.at("fs").get<double>();
  c.tc = j.at("tc").get<double>();
  c.pn = j.at("pn").get<int>();
  c.n_tx = j.at("n_tx").get<int>();
  c.n_rx = j.at("n_rx").get<int>();
  c.prt = j.at("prt").get<double>();
  for (const auto& p : j.at("rx_positions")) {
    c.rx_positions.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
  }
  c.validate();
  return c;
}

json mount_json(const scene::MountPose& m) {
  return {{"theta_tilt", m.theta_tilt}, {"x_r", m.x_r}, {"y_r", m.y_r}, {"h", m.h}};
}

scene::MountPose mount_from_json(const json& j) {
  scene::MountPose m;
  m.theta_tilt = j.at("theta_tilt").get<double>();
  m.x_r = j.at("x_r").get<double>();
  m.y_r = j.at("y_r").get<double>();
  m.h = j.at("h").get<double>();
  m.validate();
  return m;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create directory " + p.string() + ": " + ec.message());
}

RecordingMeta meta_of(const PairedRecording& rec, const DatasetSpec& spec) {
  RecordingMeta m;
  m.label = rec.label;
  m.seed = rec.seed;
  m.split = rec.split;
  m.range_m = rec.range_m;
  m.hand = rec.hand;
  m.cfg = spec.cfg;
  m.mount = spec.mount;
  return m;
}

void check_split(const std::string& split) {
  if (split != kTrainSplit && split != kEvalSplit) {
    fail(ErrorCode::kInvalidArgument, "unknown split '" + split + "' (expected train or eval)");
  }
}

}  // namespace

void DatasetSpec::validate() const {
  require(train_per_class >= 1 && eval_per_class >= 1, "per-class counts must be at least 1");
  require(eval_clutter >= 0, "clutter count must be non-negative");
  require(seed < (1ULL << 40), "dataset seed must be below 2^40");
  cfg.validate();
  mount.validate();
}

std::uint64_t recording_seed(std::uint64_t seed, const std::string& split, int idx) {
  check_split(split);
  require(idx >= 0 && static_cast<std::uint64_t>(idx) < kEvalSeedOffset, "recording index out of range");
  return (seed << 20) + (split == kEvalSplit ? kEvalSeedOffset : 0) + static_cast<std::uint64_t>(idx);
}

std::string recording_id(const std::string& split, int idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d", split.c_str(), idx);
  return buf;
}

int split_size(const DatasetSpec& spec, const std::string& split) {
  check_split(split);
  return scene::kNumClasses * (split == kTrainSplit ? spec.train_per_class : spec.eval_per_class);
}

PairedRecording simulate_split_recording(const DatasetSpec& spec, const std::string& split, int idx) {
  scene::RecordingOptions opts;
  opts.cfg = spec.cfg;
  opts.mount = spec.mount;
  opts.noise = spec.noise;
  opts.room = spec.room;
  opts.clutter_count = split == kEvalSplit ? spec.eval_clutter : 0;
  const auto label = scene::gesture_from_code(idx % scene::kNumClasses);
  PairedRecording rec = scene::simulate_recording(label, recording_seed(spec.seed, split, idx), opts);
  rec.id = recording_id(split, idx);
  rec.split = split;
  return rec;
}

std::vector<PairedRecording> simulate_split(const DatasetSpec& spec, const std::string& split, int threads) {
  spec.validate();
  std::vector<PairedRecording> out(static_cast<std::size_t>(split_size(spec, split)));
  parallel_for(out.size(), threads,
               [&](std::size_t i) { out[i] = simulate_split_recording(spec, split, static_cast<int>(i)); });
  return out;
}

void generate_dataset(const std::string& root, const DatasetSpec& spec, int threads) {
  spec.validate();
  make_dirs(root);
  json recordings = json::array();
  for (const std::string split : {kTrainSplit, kEvalSplit}) {
    const int n = split_size(spec, split);
    // Recordings are simulated and written one chunk at a time to bound memory.
    const int chunk = std::max(1, threads) * 8;
    for (int start = 0; start < n; start += chunk) {
      const int count = std::min(chunk, n - start);
      parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
        const int idx = start + static_cast<int>(i);
        const PairedRecording rec = simulate_split_recording(spec, split, idx);
        const fs::path dir = fs::path(root) / split / rec.id;
        make_dirs(dir);
        write_cube_file((dir / "cube.bin").string(), rec.cubes);
        write_text_file((dir / "skeleton.jsonl").string(), skeleton_jsonl(rec.skeletons));
        write_text_file((dir / "meta.json").string(), meta_json(meta_of(rec, spec)));
      });
    }
    for (int idx = 0; idx < n; ++idx) {
      recordings.push_back({{"id", recording_id(split, idx)},
                            {"split", split},
                            {"label", idx % scene::kNumClasses},
                            {"label_name", scene::gesture_name(scene::gesture_from_code(idx % scene::kNumClasses))},
                            {"seed", recording_seed(spec.seed, split, idx)}});
    }
  }
  json manifest = {{"format", "radargest-dataset"},
                   {"kind", "raw"},
                   {"seed", spec.seed},
                   {"train_per_class", spec.train_per_class},
                   {"eval_per_class", spec.eval_per_class},
                   {"snr_db", spec.noise.enabled ? json(spec.noise.snr_db) : json(nullptr)},
                   {"eval_clutter", spec.eval_clutter},
                   {"room", {{"lo", {spec.room.lo.x(), spec.room.lo.y(), spec.room.lo.z()}},
                             {"hi", {spec.room.hi.x(), spec.room.hi.y(), spec.room.hi.z()}}}},
                   {"radar", config_json(spec.cfg)},
                   {"mount", mount_json(spec.mount)},
                   {"recordings", recordings}};
  write_text_file((fs::path(root) / "manifest.json").string(), manifest.dump(2) + "\n");
}

ProcessedRecording preprocess_recording(const dsp::FramePipeline& pipeline, const PairedRecording& rec,
                                        bool keep_skeletons) {
  ProcessedRecording out;
  out.id = rec.id;
  out.split = rec.split;
  out.label = rec.label;
  out.seed = rec.seed;
  out.clouds = dsp::process_recording(pipeline, rec.cubes);
  if (keep_skeletons) out.skeletons = rec.skeletons;
  return out;
}

void preprocess_dataset(const std::string& in_root, const std::string& out_root, const PreprocessOptions& opts,
                        int threads) {
  require(opts.top_bins >= 1, "top-bins must be at least 1");
  require(opts.n_points >= 1, "n-points must be at least 1");
  const fs::path in(in_root);
  const json manifest = parse_json(read_text_file((in / "manifest.json").string()), (in / "manifest.json").string());
  std::vector<std::pair<std::string, std::string>> items;
  try {
    for (const auto& r : manifest.at("recordings")) {
      items.emplace_back(r.at("split").get<std::string>(), r.at("id").get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, (in / "manifest.json").string() + ": " + e.what());
  }
  make_dirs(out_root);
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto& [split, id] = items[i];
    check_split(split);
    const fs::path src = in / split / id;
    const fs::path dst = fs::path(out_root) / split / id;
    const std::string meta_text = read_text_file((src / "meta.json").string());
    const RecordingMeta meta = parse_meta_json(meta_text, (src / "meta.json").string());
    const auto cubes = read_cube_file((src / "cube.bin").string(), meta.cfg);
    dsp::PipelineOptions po;
    po.top_bins = opts.top_bins;
    po.n_points = opts.n_points;
    const dsp::FramePipeline pipeline(meta.cfg, meta.mount, po);
    const auto clouds = dsp::process_recording(pipeline, cubes);
    make_dirs(dst);
    write_text_file((dst / "pointcloud.jsonl").string(), pointcloud_jsonl(clouds));
    write_text_file((dst / "meta.json").string(), meta_text);
    // Camera data exists only for training; the eval split stays radar-only.
    if (split == kTrainSplit) {
      write_text_file((dst / "skeleton.jsonl").string(), read_text_file((src / "skeleton.jsonl").string()));
    }
  });
  json out_manifest = manifest;
  out_manifest["kind"] = "pointcloud";
  out_manifest["top_bins"] = opts.top_bins;
  out_manifest["n_points"] = opts.n_points;
  write_text_file((fs::path(out_root) / "manifest.json").string(), out_manifest.dump(2) + "\n");
}

void write_cube_file(const std::string& path, const std::vector<scene::RawRadarCube>& cubes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  for (const auto& c : cubes) {
    out.write(reinterpret_cast<const char*>(c.samples.data()),
              static_cast<std::streamsize>(c.samples.size() * sizeof(float)));
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

std::vector<scene::RawRadarCube> read_cube_file(const std::string& path, const scene::RadarConfig& cfg) {
  const std::string bytes = read_text_file(path);
  const std::size_t frame_floats = static_cast<std::size_t>(cfg.n_rx) * cfg.pn * cfg.nts;
  const std::size_t frame_bytes = frame_floats * sizeof(float);
  if (bytes.size() % frame_bytes != 0 || bytes.empty()) {
    throw Error(ErrorCode::kFormat,
                path + ": size " + std::to_string(bytes.size()) + " is not a whole number of " +
                    std::to_string(frame_bytes) + "-byte frames",
                static_cast<std::int64_t>(bytes.size() - bytes.size() % frame_bytes));
  }
  std::vector<scene::RawRadarCube> cubes(bytes.size() / frame_bytes);
  for (std::size_t f = 0; f < cubes.size(); ++f) {
    auto& c = cubes[f];
    c = scene::RawRadarCube::zeros(cfg, static_cast<int>(f));
    std::memcpy(c.samples.data(), bytes.data() + f * frame_bytes, frame_bytes);
    for (std::size_t i = 0; i < frame_floats; ++i) {
      if (!std::isfinite(c.samples[i])) {
        throw Error(ErrorCode::kFormat, path + ": non-finite sample",
                    static_cast<std::int64_t>(f * frame_bytes + i * sizeof(float)));
      }
    }
  }
  return cubes;
}

std::string skeleton_jsonl(const std::vector<SkeletonFrame>& frames) {
  std::string out;
  for (const auto& f : frames) {
    json line = json::array();
    for (const auto& j : f.joints) line.push_back({j.x(), j.y(), j.z()});
    out += line.dump() + "\n";
  }
  return out;
}

std::vector<SkeletonFrame> parse_skeleton_jsonl(const std::string& text, const std::string& path) {
  std::vector<SkeletonFrame> frames;
  for (const auto& [offset, line] : lines_of(text)) {
    const json j = parse_json(line, path, offset);
    if (!j.is_array() || j.size() != scene::kNumJoints) {
      throw Error(ErrorCode::kFormat, path + ": skeleton line must hold 17 joints", offset);
    }
    SkeletonFrame f;
    for (int k = 0; k < scene::kNumJoints; ++k) {
      const json& p = j[static_cast<std::size_t>(k)];
      if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number()) {
        throw Error(ErrorCode::kFormat, path + ": joint " + std::to_string(k) + " must be 3 numbers", offset);
      }
      f.joints[static_cast<std::size_t>(k)] = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    }
    frames.push_back(f);
  }
  return frames;
}

std::string pointcloud_jsonl(const std::vector<dsp::RadarPointCloud>& clouds) {
  std::string out;
  for (const auto& c : clouds) {
    json pts = json::array();
    for (const auto& p : c.points) pts.push_back({p.x, p.y, p.z, p.d, p.intensity});
    out += json{{"points", pts}, {"valid_count", c.valid_count}}.dump() + "\n";
  }
  return out;
}

std::vector<dsp::RadarPointCloud> parse_pointcloud_jsonl(const std::string& text, const std::string& path) {
  std::vector<dsp::RadarPointCloud> clouds;
  for (const auto& [offset, line] : lines_of(text)) {
    const json j = parse_json(line, path, offset);
    dsp::RadarPointCloud c;
    try {
      for (const auto& p : j.at("points")) {
        if (p.size() != dsp::kPointFeatures) {
          throw Error(ErrorCode::kFormat, path + ": points need 5 features", offset);
        }
        c.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>(),
                            p[4].get<double>()});
      }
      c.valid_count = j.at("valid_count").get<int>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, path + ": " + e.what(), offset);
    }
    if (c.valid_count < 0 || c.valid_count > static_cast<int>(c.points.size())) {
      throw Error(ErrorCode::kFormat, path + ": valid_count out of range", offset);
    }
    clouds.push_back(std::move(c));
  }
  return clouds;
}

std::string meta_json(const RecordingMeta& m) {
  json j = {{"label", static_cast<int>(m.label)},
            {"label_name", scene::gesture_name(m.label)},
            {"seed", m.seed},
            {"split", m.split},
            {"range_m", m.range_m},
            {"hand", m.hand == scene::Handedness::kLeft ? "left" : "right"},
            {"radar", config_json(m.cfg)},
            {"mount", mount_json(m.mount)}};
  return j.dump(2) + "\n";
}

RecordingMeta parse_meta_json(const std::string& text, const std::string& path) {
  const json j = parse_json(text, path);
  RecordingMeta m;
  try {
    m.label = scene::gesture_from_code(j.at("label").get<int>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split = j.value("split", "");
    m.range_m = j.value("range_m", 0.0);
    m.hand = j.value("hand", "right") == "left" ? scene::Handedness::kLeft : scene::Handedness::kRight;
    m.cfg = config_from_json(j.at("radar"));
    m.mount = mount_from_json(j.at("mount"));
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, path + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, path + ": " + e.what());
  }
  return m;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text_file(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) fs::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

DatasetReader::DatasetReader(std::string root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) fail(ErrorCode::kIo, "dataset directory " + root_ + " does not exist");
}

std::string DatasetReader::read_logged(const std::string& path) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    log_.push_back(path);
  }
  return read_text_file(path);
}

std::vector<std::string> DatasetReader::ids(const std::string& split) const {
  check_split(split);
  const fs::path manifest = fs::path(root_) / "manifest.json";
  std::vector<std::string> out;
  if (fs::exists(manifest)) {
    const json j = parse_json(read_logged(manifest.string()), manifest.string());
    try {
      for (const auto& r : j.at("recordings")) {
        if (r.at("split").get<std::string>() == split) out.push_back(r.at("id").get<std::string>());
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kFormat, manifest.string() + ": " + e.what());
    }
    return out;
  }
  const fs::path dir = fs::path(root_) / split;
  if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "split directory " + dir.string() + " does not exist");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ProcessedRecording DatasetReader::load(const std::string& split, const std::string& id, bool with_skeletons) const {
  const fs::path dir = fs::path(root_) / split / id;
  const RecordingMeta meta = parse_meta_json(read_logged((dir / "meta.json").string()), (dir / "meta.json").string());
  ProcessedRecording r;
  r.id = id;
  r.split = split;
  r.label = meta.label;
  r.seed = meta.seed;
  const std::string pc_path = (dir / "pointcloud.jsonl").string();
  r.clouds = parse_pointcloud_jsonl(read_logged(pc_path), pc_path);
  if (with_skeletons) {
    const std::string sk_path = (dir / "skeleton.jsonl").string();
    if (!fs::exists(sk_path)) {
      fail(ErrorCode::kIo, "recording " + id + " has no skeleton.jsonl; the camera modality is required here");
    }
    r.skeletons = parse_skeleton_jsonl(read_logged(sk_path), sk_path);
    if (r.skeletons.size() != r.clouds.size()) {
      fail(ErrorCode::kFormat, "recording " + id + ": skeleton and point-cloud frame counts differ");
    }
  }
  return r;
}

std::vector<ProcessedRecording> DatasetReader::load_split(const std::string& split, bool with_skeletons,
                                                          int threads) const {
  const auto list = ids(split);
  std::vector<ProcessedRecording> out(list.size());
  parallel_for(list.size(), threads, [&](std::size_t i) { out[i] = load(split, list[i], with_skeletons); });
  return out;
}

std::vector<std::string> DatasetReader::access_log() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return log_;
}

bool DatasetReader::touched_skeletons(const std::string& split) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return std::any_of(log_.begin(), log_.end(), [&](const std::string& p) {
    const fs::path path(p);
    if (path.filename() != "skeleton.jsonl") return false;
    return split.empty() || path.parent_path().parent_path().filename() == split;
  });
}

}  // namespace radargest::training
