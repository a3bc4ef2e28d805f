#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "radargest/common/rng.hpp"

namespace radargest::scene {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr int kSequenceLength = 30;
inline constexpr int kNumJoints = 17;
inline constexpr int kNumClasses = 5;

using Vec3 = Eigen::Vector3d;

// FMCW operating point. Positions of the receive antennas are in the radar
// frame (x across, y boresight, z up), in metres.
struct RadarConfig {
  double f_min = 57.5e9;
  double f_max = 58.5e9;
  double frame_rate = 20.0;
  int nts = 64;
  double fs = 2.0e6;
  double tc = 64.0e-6;
  int pn = 128;
  int n_tx = 1;
  int n_rx = 3;
  double prt = 64.0e-6;
  std::vector<Vec3> rx_positions;

  double bandwidth() const { return f_max - f_min; }
  double center_frequency() const { return 0.5 * (f_min + f_max); }
  double wavelength() const { return kSpeedOfLight / center_frequency(); }
  double chirp_slope() const { return bandwidth() / tc; }
  double sampling_window() const { return nts / fs; }
  // Bandwidth swept while the ADC is sampling (start-of-ramp sampling).
  double sampled_bandwidth() const { return chirp_slope() * sampling_window(); }
  double range_resolution() const { return kSpeedOfLight / (2.0 * sampled_bandwidth()); }
  double velocity_resolution() const { return wavelength() / (2.0 * pn * prt); }
  double max_velocity() const { return wavelength() / (4.0 * prt); }
  double beat_frequency(double range_m) const { return 2.0 * range_m * chirp_slope() / kSpeedOfLight; }

  // Throws Error(kInvalidArgument) naming the first violated invariant.
  void validate() const;
};

RadarConfig make_default_config();

// Radar placement in the ground frame: p_ground = R(theta_tilt) p_radar + (x_r, y_r, h).
struct MountPose {
  double theta_tilt = 0.0;
  double x_r = 0.0;
  double y_r = 0.0;
  double h = 1.2;

  Eigen::Matrix3d rotation() const;
  Vec3 position() const { return {x_r, y_r, h}; }
  Vec3 to_radar_frame(const Vec3& ground) const;
  void validate() const;
};

enum class GestureClass : int {
  kSwipe = 0,
  kPush = 1,
  kPull = 2,
  kClockwise = 3,
  kAnticlockwise = 4,
};

const char* gesture_name(GestureClass c);
std::optional<GestureClass> gesture_from_name(std::string_view name);
GestureClass gesture_from_code(int code);

enum class Handedness { kLeft, kRight };

struct Scatterer {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double rcs = 1.0;
};

// One frame of real ADC samples, index order [rx][chirp][sample]. Samples are
// kept in single precision, which is what the on-disk format stores.
struct RawRadarCube {
  int n_rx = 0;
  int pn = 0;
  int nts = 0;
  int frame_index = 0;
  std::vector<float> samples;

  static RawRadarCube zeros(const RadarConfig& cfg, int frame_index = 0);
  std::size_t index(int rx, int chirp, int sample) const {
    return (static_cast<std::size_t>(rx) * pn + chirp) * nts + sample;
  }
  float at(int rx, int chirp, int sample) const { return samples[index(rx, chirp, sample)]; }
  bool same_shape(const RawRadarCube& o) const { return n_rx == o.n_rx && pn == o.pn && nts == o.nts; }
  std::string shape_string() const;
};

// Coco keypoint order.
inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "nose",       "left_eye",    "right_eye",  "left_ear",    "right_ear",  "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hip",
    "right_hip",  "left_knee",   "right_knee", "left_ankle",  "right_ankle"};

enum Joint : int {
  kNose = 0, kLeftEye, kRightEye, kLeftEar, kRightEar, kLeftShoulder, kRightShoulder,
  kLeftElbow, kRightElbow, kLeftWrist, kRightWrist, kLeftHip, kRightHip,
  kLeftKnee, kRightKnee, kLeftAnkle, kRightAnkle,
};

struct SkeletonFrame {
  std::array<Vec3, kNumJoints> joints{};
};

struct HandSample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

// Person placement for one recording. `forward` is the horizontal unit
// vector the person faces (towards the radar).
struct BodyPose {
  Vec3 anchor = Vec3::Zero();
  Vec3 forward = Vec3(0, -1, 0);
  Handedness hand = Handedness::kRight;

  Vec3 right() const;  // person's right, horizontal
  Vec3 shoulder(Handedness side) const;
};

struct RecordingPlan {
  GestureClass label = GestureClass::kSwipe;
  std::uint64_t seed = 0;
  double range_m = 1.5;
  BodyPose body;
  std::vector<HandSample> trajectory;  // kSequenceLength samples
};

// Places the person so that the gesture centre sits range_m from the radar and
// generates the hand path for `label`. Range outside [1, 2] m is rejected.
RecordingPlan plan_recording(GestureClass label, std::uint64_t seed, double range_m,
                             const RadarConfig& cfg = make_default_config(), const MountPose& mount = {});

std::vector<HandSample> synth_gesture_trajectory(GestureClass label, std::uint64_t seed, double range_m,
                                                 const RadarConfig& cfg = make_default_config(),
                                                 const MountPose& mount = {});

struct SkeletonResult {
  SkeletonFrame frame;
  bool clamped = false;  // hand was outside the arm's reach
};

inline constexpr double kUpperArm = 0.30;
inline constexpr double kForearm = 0.27;

// Static joints get isotropic Gaussian noise of `noise_sigma` metres; pass
// rng = nullptr or sigma = 0 for a noiseless skeleton.
SkeletonResult trajectory_to_skeleton(const Vec3& hand_position, const BodyPose& body,
                                      double noise_sigma = 0.005, Rng* rng = nullptr);

struct NoiseOptions {
  bool enabled = true;
  double snr_db = 20.0;  // per-sample SNR of the strongest scatterer
};

// Dechirped beat-signal synthesis, see README for the signal model.
RawRadarCube simulate_raw_frame(const RadarConfig& cfg, const std::vector<Scatterer>& scatterers,
                                const MountPose& mount, const NoiseOptions& noise = {}, Rng* rng = nullptr,
                                int frame_index = 0);

struct RoomBounds {
  Vec3 lo = Vec3(-2.5, 0.2, 0.0);
  Vec3 hi = Vec3(2.5, 4.5, 2.8);
  bool contains(const Vec3& p) const;
};

struct PairedRecording {
  std::string id;
  std::string split;
  GestureClass label = GestureClass::kSwipe;
  std::uint64_t seed = 0;
  double range_m = 0.0;
  Handedness hand = Handedness::kRight;
  std::vector<RawRadarCube> cubes;
  std::vector<SkeletonFrame> skeletons;
};

struct RecordingOptions {
  RadarConfig cfg = make_default_config();
  MountPose mount;
  NoiseOptions noise;
  RoomBounds room;
  int clutter_count = 0;  // static reflectors with the hand's rcs
};

inline constexpr double kHandRcs = 1.0;

// Radar scene for frame t: moving arm reflectors with velocities from central
// differences of the noiseless skeletons, static torso and head, plus clutter.
std::vector<Scatterer> scene_scatterers(const std::vector<SkeletonFrame>& clean_skeletons, int t,
                                        const BodyPose& body, double frame_rate,
                                        const std::vector<Scatterer>& clutter);

PairedRecording simulate_recording(GestureClass label, std::uint64_t seed, const RecordingOptions& opts);

}  // namespace radargest::scene
