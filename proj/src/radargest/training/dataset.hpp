#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "radargest/radar_dsp/radar_dsp.hpp"
#include "radargest/scene_sim/scene_sim.hpp"

namespace radargest::training {

using scene::GestureClass;
using scene::PairedRecording;
using scene::SkeletonFrame;

inline const char* const kTrainSplit = "train";
inline const char* const kEvalSplit = "eval";

struct DatasetSpec {
  int train_per_class = 200;
  int eval_per_class = 50;
  std::uint64_t seed = 0;
  scene::RadarConfig cfg = scene::make_default_config();
  scene::MountPose mount;
  scene::NoiseOptions noise;
  scene::RoomBounds room;
  int eval_clutter = 2;

  void validate() const;
};

// Recording idx of a split: label idx % 5, seed from a split-specific range
// (train: seed * 2^20 + idx, eval: seed * 2^20 + 2^19 + idx).
std::uint64_t recording_seed(std::uint64_t seed, const std::string& split, int idx);
std::string recording_id(const std::string& split, int idx);
int split_size(const DatasetSpec& spec, const std::string& split);

PairedRecording simulate_split_recording(const DatasetSpec& spec, const std::string& split, int idx);
std::vector<PairedRecording> simulate_split(const DatasetSpec& spec, const std::string& split, int threads);

// Writes <root>/{train,eval}/<id>/{cube.bin, skeleton.jsonl, meta.json} and
// <root>/manifest.json.
void generate_dataset(const std::string& root, const DatasetSpec& spec, int threads);

// Radar point clouds of one recording, with skeleton targets when available.
struct ProcessedRecording {
  std::string id;
  std::string split;
  GestureClass label = GestureClass::kSwipe;
  std::uint64_t seed = 0;
  std::vector<dsp::RadarPointCloud> clouds;
  std::vector<SkeletonFrame> skeletons;  // empty when the camera modality is absent
};

ProcessedRecording preprocess_recording(const dsp::FramePipeline& pipeline, const PairedRecording& rec,
                                        bool keep_skeletons);

struct PreprocessOptions {
  int top_bins = 25;
  int n_points = dsp::kCloudSize;
};

// Reads a simulated dataset and writes <out>/{train,eval}/<id>/pointcloud.jsonl
// plus meta.json; skeleton.jsonl is carried over for the train split only.
void preprocess_dataset(const std::string& in_root, const std::string& out_root, const PreprocessOptions& opts,
                        int threads);

// File formats.
void write_cube_file(const std::string& path, const std::vector<scene::RawRadarCube>& cubes);
std::vector<scene::RawRadarCube> read_cube_file(const std::string& path, const scene::RadarConfig& cfg);
std::string skeleton_jsonl(const std::vector<SkeletonFrame>& frames);
std::vector<SkeletonFrame> parse_skeleton_jsonl(const std::string& text, const std::string& path);
std::string pointcloud_jsonl(const std::vector<dsp::RadarPointCloud>& clouds);
std::vector<dsp::RadarPointCloud> parse_pointcloud_jsonl(const std::string& text, const std::string& path);

struct RecordingMeta {
  GestureClass label = GestureClass::kSwipe;
  std::uint64_t seed = 0;
  std::string split;
  double range_m = 0.0;
  scene::Handedness hand = scene::Handedness::kRight;
  scene::RadarConfig cfg = scene::make_default_config();
  scene::MountPose mount;
};

std::string meta_json(const RecordingMeta& meta);
RecordingMeta parse_meta_json(const std::string& text, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Access-logging reader over a preprocessed dataset. Every file opened is
// recorded so that tests can audit which modalities a run touched.
class DatasetReader {
 public:
  explicit DatasetReader(std::string root);

  const std::string& root() const { return root_; }
  // Recording ids of a split in manifest order; falls back to a sorted
  // directory listing when there is no manifest.
  std::vector<std::string> ids(const std::string& split) const;
  ProcessedRecording load(const std::string& split, const std::string& id, bool with_skeletons) const;
  std::vector<ProcessedRecording> load_split(const std::string& split, bool with_skeletons, int threads) const;

  std::vector<std::string> access_log() const;
  bool touched_skeletons(const std::string& split = "") const;

 private:
  std::string read_logged(const std::string& path) const;

  std::string root_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> log_;
};

}  // namespace radargest::training
