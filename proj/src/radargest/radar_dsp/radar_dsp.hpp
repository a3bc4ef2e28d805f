#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "radargest/scene_sim/scene_sim.hpp"

namespace radargest::dsp {

using scene::MountPose;
using scene::RadarConfig;
using scene::RawRadarCube;
using cdouble = std::complex<double>;

// In-place iterative radix-2 FFT, X[k] = sum_n x[n] exp(-2 pi i k n / N).
// Lengths that are not a power of two are rejected.
void fft(std::span<cdouble> data);
bool is_power_of_two(std::size_t n);
std::vector<double> hann_window(int length);

// Per-antenna complex range-Doppler maps, index order [rx][range][doppler].
// The Doppler axis is FFT-shifted: bin pn/2 is zero velocity.
struct RangeDopplerMaps {
  int n_rx = 0;
  int n_range = 0;
  int n_doppler = 0;
  std::vector<cdouble> data;

  std::size_t index(int rx, int r, int d) const {
    return (static_cast<std::size_t>(rx) * n_range + r) * n_doppler + d;
  }
  const cdouble& at(int rx, int r, int d) const { return data[index(rx, r, d)]; }
  cdouble& at(int rx, int r, int d) { return data[index(rx, r, d)]; }
};

// Real non-negative map, index order [range][doppler].
struct IntensityMap {
  int n_range = 0;
  int n_doppler = 0;
  std::vector<double> values;

  double at(int r, int d) const { return values[static_cast<std::size_t>(r) * n_doppler + d]; }
  double& at(int r, int d) { return values[static_cast<std::size_t>(r) * n_doppler + d]; }
};

struct DetectionBin {
  int range_bin = 0;
  int doppler_bin = 0;
  double intensity = 0.0;
};

struct AngleEstimate {
  double theta_azi = 0.0;
  double theta_ele = 0.0;
  double spectrum_peak = 0.0;
};

struct RadarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double d = 0.0;
  double intensity = 0.0;

  bool operator==(const RadarPoint&) const = default;
};

inline constexpr int kCloudSize = 64;
inline constexpr int kPointFeatures = 5;

struct RadarPointCloud {
  std::vector<RadarPoint> points;  // always `n` entries
  int valid_count = 0;

  bool operator==(const RadarPointCloud&) const = default;
};

// Previous-frame subtraction.
RawRadarCube mti_filter(const RawRadarCube& curr, const RawRadarCube& prev);

struct FftOptions {
  bool window_range = true;
  bool window_doppler = true;
};

RangeDopplerMaps range_doppler_fft(const RawRadarCube& cube, const FftOptions& opts = {});

// Non-coherent sum over antennas of |X|^2.
IntensityMap intensity_map(const RangeDopplerMaps& maps);

struct GateOptions {
  int half_range = 5;
  int half_doppler = 16;
};

struct GateResult {
  std::vector<bool> mask;  // [range][doppler]
  DetectionBin peak;
  bool empty = false;  // map had no energy
};

GateResult gate_detections(const IntensityMap& rdi, const GateOptions& opts = {});

// Highest-intensity bins among those kept by `mask` with nonzero intensity,
// descending; ties ordered by (range_bin, doppler_bin) ascending.
std::vector<DetectionBin> select_top_bins(const IntensityMap& rdi, const std::vector<bool>& mask, int k);

// Average of v v^H over a (2*half_range+1) x (2*half_doppler+1) window,
// clipped at the map edges.
Eigen::MatrixXcd window_covariance(const RangeDopplerMaps& maps, const DetectionBin& bin, int half_range = 2,
                                   int half_doppler = 1);

struct DoaGridOptions {
  double azi_min_deg = -60.0;
  double azi_max_deg = 60.0;
  double ele_min_deg = -44.0;  // grid anchored at 0 so even angles are on it
  double ele_max_deg = 44.0;
  double step_deg = 2.0;
};

// Steering vector for the array in `cfg`: a_m = exp(-i 2 pi u . d_m / lambda).
Eigen::VectorXcd steering_vector(const RadarConfig& cfg, double theta_azi, double theta_ele);

// Precomputed steering vectors over the search grid.
class BartlettBeamformer {
 public:
  explicit BartlettBeamformer(const RadarConfig& cfg, const DoaGridOptions& grid = {});

  // Grid argmax of a^H C a. Ties resolve to the smallest (azimuth, elevation).
  AngleEstimate estimate(const Eigen::MatrixXcd& cov) const;
  double spectrum(const Eigen::MatrixXcd& cov, double theta_azi, double theta_ele) const;

  const std::vector<double>& azimuths() const { return azimuths_; }
  const std::vector<double>& elevations() const { return elevations_; }

 private:
  RadarConfig cfg_;
  std::vector<double> azimuths_;
  std::vector<double> elevations_;
  std::vector<Eigen::VectorXcd> steering_;  // [azi][ele] flattened
  std::size_t basis_terms_ = 0;
  std::vector<double> basis_;  // [term][grid point]
};

AngleEstimate bartlett_doa(const Eigen::MatrixXcd& cov, const RadarConfig& cfg, const DoaGridOptions& grid = {});

Eigen::Vector3d spherical_to_ground(double r, double theta_azi, double theta_ele, const MountPose& mount);

RadarPointCloud assemble_point_cloud(std::vector<RadarPoint> points, int n = kCloudSize);

struct PipelineOptions {
  int top_bins = 25;
  int n_points = kCloudSize;
  GateOptions gate;
  FftOptions fft;
  DoaGridOptions grid;
};

// Stateless preprocessing of one frame. Holds the beamformer tables so a
// recording can be processed without rebuilding them per frame.
class FramePipeline {
 public:
  FramePipeline(const RadarConfig& cfg, const MountPose& mount, const PipelineOptions& opts = {});

  RadarPointCloud process(const RawRadarCube& curr, const RawRadarCube& prev) const;

  const RadarConfig& config() const { return cfg_; }
  const PipelineOptions& options() const { return opts_; }

 private:
  RadarConfig cfg_;
  MountPose mount_;
  PipelineOptions opts_;
  BartlettBeamformer beamformer_;
};

RadarPointCloud frame_pipeline(const RawRadarCube& curr, const RawRadarCube& prev, const RadarConfig& cfg,
                               const MountPose& mount, const PipelineOptions& opts = {});

// Point clouds for a whole recording. Frame 0 has no predecessor, so its MTI
// reference is frame 1.
std::vector<RadarPointCloud> process_recording(const FramePipeline& pipeline,
                                               const std::vector<RawRadarCube>& cubes);

}  // namespace radargest::dsp
