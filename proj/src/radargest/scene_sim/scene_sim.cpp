#include "radargest/scene_sim/scene_sim.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "radargest/common/error.hpp"

namespace radargest::scene {

namespace {

constexpr double kPi = std::numbers::pi;

// Rng stream tags; a recording seed fans out into independent streams.
enum StreamTag : std::uint64_t {
  kTagPlan = 1,
  kTagJitter = 2,
  kTagSkeleton = 3,
  kTagRadar = 4,
  kTagRange = 5,
  kTagClutter = 6,
};

constexpr double kJitterSigma = 0.003;
constexpr double kShoulderHeight = 0.30;
constexpr double kShoulderHalfWidth = 0.18;

bool finite(const Vec3& v) { return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z()); }

Vec3 unit(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-12) fail(ErrorCode::kNumeric, "cannot normalise a zero-length vector");
  return v / n;
}

// Monotone progress profile on [0, 1]; its slope never drops to zero so
// push/pull stay strictly monotone in range.
double progress(double tau) { return 0.15 * tau + 0.85 * 0.5 * (1.0 - std::cos(kPi * tau)); }

Vec3 side_out(const BodyPose& body) {
  return body.hand == Handedness::kRight ? body.right() : Vec3(-body.right());
}

}  // namespace

void RadarConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, std::string("invalid radar config: ") + what);
  };
  check(f_max > f_min, "f_max must exceed f_min");
  check(nts > 0 && fs > 0 && tc > 0, "nts, fs and tc must be positive");
  check(nts / fs <= tc * (1.0 + 1e-12), "sampling window nts/fs exceeds the chirp duration tc");
  check(pn >= 2, "pn must be at least 2");
  check(prt >= tc * (1.0 - 1e-12), "prt must be at least tc");
  check(n_tx >= 1 && n_rx >= 1, "antenna counts must be positive");
  check(static_cast<int>(rx_positions.size()) == n_rx, "rx_positions must have n_rx entries");
  check(frame_rate > 0, "frame_rate must be positive");
}

RadarConfig make_default_config() {
  RadarConfig cfg;
  const double half_lambda = 0.5 * cfg.wavelength();
  // L-shaped array: rx0 reference, rx1 along azimuth, rx2 along elevation.
  cfg.rx_positions = {Vec3(0, 0, 0), Vec3(half_lambda, 0, 0), Vec3(0, 0, half_lambda)};
  return cfg;
}

Eigen::Matrix3d MountPose::rotation() const {
  const double c = std::cos(theta_tilt);
  const double s = std::sin(theta_tilt);
  Eigen::Matrix3d r;
  r << 1, 0, 0,
       0, c, s,
       0, -s, c;
  return r;
}

Vec3 MountPose::to_radar_frame(const Vec3& ground) const {
  return rotation().transpose() * (ground - position());
}

void MountPose::validate() const {
  require(std::abs(theta_tilt) <= kPi / 2 + 1e-12, "mount tilt must satisfy |theta_tilt| <= pi/2");
  require(std::isfinite(x_r) && std::isfinite(y_r) && std::isfinite(h), "mount offsets must be finite");
}

const char* gesture_name(GestureClass c) {
  switch (c) {
    case GestureClass::kSwipe: return "swipe";
    case GestureClass::kPush: return "push";
    case GestureClass::kPull: return "pull";
    case GestureClass::kClockwise: return "clockwise";
    case GestureClass::kAnticlockwise: return "anticlockwise";
  }
  return "unknown";
}

std::optional<GestureClass> gesture_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (name == gesture_name(static_cast<GestureClass>(i))) return static_cast<GestureClass>(i);
  }
  return std::nullopt;
}

GestureClass gesture_from_code(int code) {
  if (code < 0 || code >= kNumClasses) {
    fail(ErrorCode::kInvalidArgument, "gesture code " + std::to_string(code) + " outside 0..4");
  }
  return static_cast<GestureClass>(code);
}

RawRadarCube RawRadarCube::zeros(const RadarConfig& cfg, int frame_index) {
  RawRadarCube cube;
  cube.n_rx = cfg.n_rx;
  cube.pn = cfg.pn;
  cube.nts = cfg.nts;
  cube.frame_index = frame_index;
  cube.samples.assign(static_cast<std::size_t>(cfg.n_rx) * cfg.pn * cfg.nts, 0.0f);
  return cube;
}

std::string RawRadarCube::shape_string() const {
  std::ostringstream os;
  os << n_rx << "x" << pn << "x" << nts;
  return os.str();
}

Vec3 BodyPose::right() const {
  // forward x up, both horizontal/vertical unit vectors
  return forward.cross(Vec3::UnitZ()).normalized();
}

Vec3 BodyPose::shoulder(Handedness side) const {
  const Vec3 out = side == Handedness::kRight ? right() : Vec3(-right());
  return anchor + kShoulderHeight * Vec3::UnitZ() + kShoulderHalfWidth * out;
}

RecordingPlan plan_recording(GestureClass label, std::uint64_t seed, double range_m, const RadarConfig& cfg,
                             const MountPose& mount) {
  if (!(range_m >= 1.0 && range_m <= 2.0)) {
    std::ostringstream os;
    os << "gesture range " << range_m << " m outside the supported interval [1, 2] m";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
  RecordingPlan plan;
  plan.label = label;
  plan.seed = seed;
  plan.range_m = range_m;

  Rng rng(seed, {kTagPlan});
  const double azimuth = rng.uniform(-12.0, 12.0) * kPi / 180.0;
  const double elevation = rng.uniform(-4.0, 8.0) * kPi / 180.0;
  const double scale = rng.uniform(0.85, 1.15);
  plan.body.hand = rng.uniform() < 0.5 ? Handedness::kLeft : Handedness::kRight;

  // Gesture centre on a ray around the horizontal projection of boresight.
  const Vec3 boresight = mount.rotation() * Vec3::UnitY();
  Vec3 fwd_h(boresight.x(), boresight.y(), 0.0);
  if (fwd_h.norm() < 1e-6) fwd_h = Vec3::UnitY();
  fwd_h.normalize();
  const Vec3 lat_h = fwd_h.cross(Vec3::UnitZ()).normalized();
  const Vec3 dir = std::cos(elevation) * (std::cos(azimuth) * fwd_h - std::sin(azimuth) * lat_h) +
                   std::sin(elevation) * Vec3::UnitZ();
  const Vec3 radar = mount.position();
  const Vec3 center = radar + range_m * dir;

  Vec3 facing = radar - center;
  facing.z() = 0.0;
  plan.body.forward = unit(facing);
  const Vec3 up = Vec3::UnitZ();
  const Vec3 out = side_out(plan.body);
  plan.body.anchor = center - 0.33 * plan.body.forward - 0.10 * out - 0.25 * up;

  const int n = kSequenceLength;
  std::vector<Vec3> path(n);
  const Vec3 radial = unit(center - radar);
  // Lateral axis as seen from the radar (observer's right).
  const Vec3 observer_right = Vec3(-plan.body.forward).cross(up).normalized();

  const bool reversed = label == GestureClass::kPull;
  const GestureClass base = reversed ? GestureClass::kPush : label;
  for (int t = 0; t < n; ++t) {
    const double s = progress(static_cast<double>(t) / (n - 1));
    Vec3 offset = Vec3::Zero();
    switch (base) {
      case GestureClass::kSwipe:
        offset = -out * (0.6 * scale * (s - 0.5));
        break;
      case GestureClass::kPush:
      case GestureClass::kPull:
        offset = -radial * (0.34 * scale * (s - 0.5));
        break;
      case GestureClass::kClockwise:
      case GestureClass::kAnticlockwise: {
        const double sign = base == GestureClass::kClockwise ? -1.0 : 1.0;
        const double angle = kPi / 2 + sign * 2.0 * kPi * s;
        const double r = 0.25 * scale;
        offset = r * (std::cos(angle) * observer_right + std::sin(angle) * up) - r * up;
        break;
      }
    }
    path[t] = center + offset;
  }

  Rng jitter(seed, {kTagJitter});
  for (int t = 0; t < n; ++t) {
    Vec3 j(jitter.normal(0, kJitterSigma), jitter.normal(0, kJitterSigma), jitter.normal(0, kJitterSigma));
    if (base == GestureClass::kPush) j -= radial * radial.dot(j);  // keep range strictly monotone
    path[t] += j;
  }
  if (reversed) std::reverse(path.begin(), path.end());

  plan.trajectory.resize(n);
  for (int t = 0; t < n; ++t) {
    plan.trajectory[t].position = path[t];
    Vec3 diff;
    if (t == 0) {
      diff = path[1] - path[0];
    } else if (t == n - 1) {
      diff = path[n - 1] - path[n - 2];
    } else {
      diff = 0.5 * (path[t + 1] - path[t - 1]);
    }
    plan.trajectory[t].velocity = diff * cfg.frame_rate;
  }
  return plan;
}

std::vector<HandSample> synth_gesture_trajectory(GestureClass label, std::uint64_t seed, double range_m,
                                                 const RadarConfig& cfg, const MountPose& mount) {
  return plan_recording(label, seed, range_m, cfg, mount).trajectory;
}

SkeletonResult trajectory_to_skeleton(const Vec3& hand_position, const BodyPose& body, double noise_sigma,
                                      Rng* rng) {
  require(finite(hand_position), "hand position must be finite");
  SkeletonResult result;
  auto& j = result.frame.joints;
  const Vec3 up = Vec3::UnitZ();
  const Vec3 fwd = body.forward;
  const Vec3 right = body.right();
  const Vec3& a = body.anchor;

  j[kNose] = a + 0.55 * up + 0.08 * fwd;
  j[kLeftEye] = a + 0.58 * up + 0.06 * fwd - 0.03 * right;
  j[kRightEye] = a + 0.58 * up + 0.06 * fwd + 0.03 * right;
  j[kLeftEar] = a + 0.56 * up - 0.07 * right;
  j[kRightEar] = a + 0.56 * up + 0.07 * right;
  j[kLeftShoulder] = body.shoulder(Handedness::kLeft);
  j[kRightShoulder] = body.shoulder(Handedness::kRight);
  j[kLeftHip] = a - 0.20 * up - 0.10 * right;
  j[kRightHip] = a - 0.20 * up + 0.10 * right;
  j[kLeftKnee] = a - 0.65 * up - 0.10 * right;
  j[kRightKnee] = a - 0.65 * up + 0.10 * right;
  j[kLeftAnkle] = a - 1.10 * up - 0.10 * right;
  j[kRightAnkle] = a - 1.10 * up + 0.10 * right;

  const bool right_active = body.hand == Handedness::kRight;
  const int active_shoulder = right_active ? kRightShoulder : kLeftShoulder;
  const int active_elbow = right_active ? kRightElbow : kLeftElbow;
  const int active_wrist = right_active ? kRightWrist : kLeftWrist;
  const int idle_shoulder = right_active ? kLeftShoulder : kRightShoulder;
  const int idle_elbow = right_active ? kLeftElbow : kRightElbow;
  const int idle_wrist = right_active ? kLeftWrist : kRightWrist;

  // Hanging idle arm.
  j[idle_elbow] = j[idle_shoulder] - kUpperArm * up;
  j[idle_wrist] = j[idle_elbow] + kForearm * (-up + 0.2 * fwd).normalized();

  // Two-segment IK for the active arm; the elbow swings down and outwards.
  const Vec3 shoulder = j[active_shoulder];
  Vec3 hand = hand_position;
  Vec3 to_hand = hand - shoulder;
  double d = to_hand.norm();
  const double reach = kUpperArm + kForearm;
  if (d > reach) {
    hand = shoulder + to_hand * (reach / d);
    to_hand = hand - shoulder;
    d = reach;
    result.clamped = true;
  }
  const Vec3 out = right_active ? right : Vec3(-right);
  if (d < 1e-12) {
    j[active_elbow] = shoulder - kUpperArm * up;
    result.clamped = true;
  } else {
    const Vec3 axis = to_hand / d;
    if (d < kUpperArm - kForearm) result.clamped = true;
    const double along = std::clamp((kUpperArm * kUpperArm - kForearm * kForearm + d * d) / (2.0 * d), -kUpperArm,
                                    kUpperArm);
    const double radius = std::sqrt(std::max(0.0, kUpperArm * kUpperArm - along * along));
    Vec3 pole = -up + 0.5 * out;
    pole -= axis * axis.dot(pole);
    if (pole.norm() < 1e-9) {
      pole = fwd - axis * axis.dot(fwd);
    }
    j[active_elbow] = shoulder + along * axis + radius * pole.normalized();
  }
  j[active_wrist] = hand;

  if (rng != nullptr && noise_sigma > 0.0) {
    for (int k = 0; k < kNumJoints; ++k) {
      if (k == active_shoulder || k == active_elbow || k == active_wrist) continue;
      j[k] += Vec3(rng->normal(0, noise_sigma), rng->normal(0, noise_sigma), rng->normal(0, noise_sigma));
    }
  }
  return result;
}

RawRadarCube simulate_raw_frame(const RadarConfig& cfg, const std::vector<Scatterer>& scatterers,
                                const MountPose& mount, const NoiseOptions& noise, Rng* rng, int frame_index) {
  cfg.validate();
  RawRadarCube cube = RawRadarCube::zeros(cfg, frame_index);
  const double lambda = cfg.wavelength();
  const Eigen::Matrix3d rot_t = mount.rotation().transpose();

  std::vector<double> acc(cube.samples.size(), 0.0);
  std::vector<std::complex<double>> fast_time(cfg.nts);
  double peak_amplitude = 0.0;

  for (const auto& s : scatterers) {
    if (!finite(s.position) || !finite(s.velocity) || !(s.rcs >= 0.0)) {
      fail(ErrorCode::kInvalidArgument, "scatterer position, velocity and rcs must be finite with rcs >= 0");
    }
    const Vec3 p = mount.to_radar_frame(s.position);
    const Vec3 v = rot_t * s.velocity;
    const double range = p.norm();
    if (range < 1e-6) fail(ErrorCode::kInvalidArgument, "scatterer at zero range from the radar");
    const double radial_velocity = p.dot(v) / range;
    const double amplitude = std::sqrt(s.rcs) / (range * range);
    peak_amplitude = std::max(peak_amplitude, amplitude);
    const double doppler_step = 2.0 * kPi * 2.0 * radial_velocity * cfg.prt / lambda;

    for (int rx = 0; rx < cfg.n_rx; ++rx) {
      const double rx_range = (p - cfg.rx_positions[rx]).norm();
      const double path = range + rx_range;
      const double beat = cfg.chirp_slope() * path / kSpeedOfLight;
      const double omega = 2.0 * kPi * beat / cfg.fs;
      for (int t = 0; t < cfg.nts; ++t) fast_time[t] = std::polar(amplitude, omega * t);
      const double phase0 = 2.0 * kPi * path / lambda;
      for (int c = 0; c < cfg.pn; ++c) {
        const std::complex<double> rot = std::polar(1.0, phase0 + doppler_step * c);
        double* out = acc.data() + cube.index(rx, c, 0);
        for (int t = 0; t < cfg.nts; ++t) out[t] += (rot * fast_time[t]).real();
      }
    }
  }

  if (noise.enabled && rng != nullptr && peak_amplitude > 0.0) {
    const double sigma = peak_amplitude / std::sqrt(2.0) * std::pow(10.0, -noise.snr_db / 20.0);
    for (double& x : acc) x += rng->normal(0.0, sigma);
  }
  for (std::size_t i = 0; i < acc.size(); ++i) cube.samples[i] = static_cast<float>(acc[i]);
  return cube;
}

bool RoomBounds::contains(const Vec3& p) const {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

std::vector<Scatterer> scene_scatterers(const std::vector<SkeletonFrame>& clean, int t, const BodyPose& body,
                                        double frame_rate, const std::vector<Scatterer>& clutter) {
  const int n = static_cast<int>(clean.size());
  require(t >= 0 && t < n, "frame index outside the recording");
  const int prev = std::max(t - 1, 0);
  const int next = std::min(t + 1, n - 1);
  const double dt = (next - prev) / frame_rate;

  const bool right_active = body.hand == Handedness::kRight;
  const int shoulder = right_active ? kRightShoulder : kLeftShoulder;
  const int elbow = right_active ? kRightElbow : kLeftElbow;
  const int wrist = right_active ? kRightWrist : kLeftWrist;

  auto point = [&](int frame, double w_shoulder, double w_elbow, double w_wrist) {
    const auto& j = clean[frame].joints;
    return Vec3(w_shoulder * j[shoulder] + w_elbow * j[elbow] + w_wrist * j[wrist]);
  };
  auto moving = [&](double ws, double we, double ww, double rcs) {
    Scatterer s;
    s.position = point(t, ws, we, ww);
    s.velocity = dt > 0 ? Vec3((point(next, ws, we, ww) - point(prev, ws, we, ww)) / dt) : Vec3::Zero();
    s.rcs = rcs;
    return s;
  };

  std::vector<Scatterer> out;
  out.push_back(moving(0.0, -0.2, 1.2, kHandRcs));  // palm, just past the wrist
  out.push_back(moving(0.0, 0.5, 0.5, 0.5));        // forearm
  out.push_back(moving(0.5, 0.5, 0.0, 0.3));        // upper arm
  Scatterer torso;
  torso.position = body.anchor;
  torso.rcs = 4.0;
  out.push_back(torso);
  Scatterer head;
  head.position = body.anchor + 0.52 * Vec3::UnitZ();
  head.rcs = 1.0;
  out.push_back(head);
  out.insert(out.end(), clutter.begin(), clutter.end());
  return out;
}

PairedRecording simulate_recording(GestureClass label, std::uint64_t seed, const RecordingOptions& opts) {
  opts.cfg.validate();
  opts.mount.validate();
  Rng range_rng(seed, {kTagRange});
  const double range_m = range_rng.uniform(1.0, 2.0);
  const RecordingPlan plan = plan_recording(label, seed, range_m, opts.cfg, opts.mount);

  PairedRecording rec;
  rec.label = label;
  rec.seed = seed;
  rec.range_m = range_m;
  rec.hand = plan.body.hand;

  const int n = kSequenceLength;
  std::vector<SkeletonFrame> clean(n);
  Rng skel_rng(seed, {kTagSkeleton});
  rec.skeletons.resize(n);
  for (int t = 0; t < n; ++t) {
    clean[t] = trajectory_to_skeleton(plan.trajectory[t].position, plan.body, 0.0).frame;
    rec.skeletons[t] = trajectory_to_skeleton(plan.trajectory[t].position, plan.body, 0.005, &skel_rng).frame;
  }

  std::vector<Scatterer> clutter;
  Rng clutter_rng(seed, {kTagClutter});
  const Vec3 radar = opts.mount.position();
  while (static_cast<int>(clutter.size()) < opts.clutter_count) {
    Scatterer c;
    c.position = Vec3(clutter_rng.uniform(opts.room.lo.x(), opts.room.hi.x()),
                      clutter_rng.uniform(opts.room.lo.y(), opts.room.hi.y()),
                      clutter_rng.uniform(opts.room.lo.z(), opts.room.hi.z()));
    c.rcs = kHandRcs;
    const double r = (c.position - radar).norm();
    if (r < 0.5 || r > 4.0) continue;
    clutter.push_back(c);
  }

  rec.cubes.reserve(n);
  for (int t = 0; t < n; ++t) {
    const auto scatterers = scene_scatterers(clean, t, plan.body, opts.cfg.frame_rate, clutter);
    for (const auto& s : scatterers) {
      if (!opts.room.contains(s.position)) {
        fail(ErrorCode::kInvalidArgument, "scatterer outside the simulated room bounds");
      }
    }
    Rng frame_rng(seed, {kTagRadar, static_cast<std::uint64_t>(t)});
    rec.cubes.push_back(simulate_raw_frame(opts.cfg, scatterers, opts.mount, opts.noise, &frame_rng, t));
  }
  return rec;
}

}  // namespace radargest::scene
