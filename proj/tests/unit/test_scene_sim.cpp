#include <cmath>
#include <complex>
#include <set>

#include <Eigen/Geometry>

#include "doctest.h"
#include "helpers.hpp"
#include "radargest/common/error.hpp"
#include "radargest/radar_dsp/radar_dsp.hpp"
#include "radargest/scene_sim/scene_sim.hpp"
#include "radargest/training/dataset.hpp"

using namespace radargest;
using namespace radargest::scene;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Scatterer straight ahead of a default-mounted radar at range r.
Scatterer boresight_scatterer(double r, double radial_velocity = 0.0) {
  MountPose mount;
  Scatterer s;
  s.position = mount.position() + Vec3(0, r, 0);
  s.velocity = Vec3(0, radial_velocity, 0);
  return s;
}

// Naive DFT magnitude argmax over the samples of one chirp, bins 0..nts/2.
int dft_range_argmax(const RawRadarCube& cube, int rx, int chirp) {
  int best = 0;
  double best_mag = -1;
  for (int k = 0; k <= cube.nts / 2; ++k) {
    std::complex<double> acc = 0;
    for (int n = 0; n < cube.nts; ++n) {
      acc += static_cast<double>(cube.at(rx, chirp, n)) * std::polar(1.0, -2 * kPi * k * n / cube.nts);
    }
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return best;
}

// Argmax of the intensity map, skipping the DC range bin.
std::pair<int, int> rdi_argmax(const dsp::IntensityMap& m) {
  std::pair<int, int> best{0, 0};
  double v = -1;
  for (int r = 1; r < m.n_range; ++r)
    for (int d = 0; d < m.n_doppler; ++d)
      if (m.at(r, d) > v) {
        v = m.at(r, d);
        best = {r, d};
      }
  return best;
}

double radial_distance(const Vec3& p) { return (p - MountPose{}.position()).norm(); }

}  // namespace

TEST_CASE("default config carries the operating parameters") {
  const RadarConfig cfg = make_default_config();
  CHECK(cfg.f_min == 57.5e9);
  CHECK(cfg.f_max == 58.5e9);
  CHECK(cfg.nts == 64);
  CHECK(cfg.pn == 128);
  CHECK(cfg.fs == 2.0e6);
  CHECK(cfg.tc == 64e-6);
  CHECK(cfg.frame_rate == 20.0);
  CHECK(cfg.n_rx == 3);
  CHECK(cfg.n_tx == 1);
  CHECK(cfg.prt == cfg.tc);
  CHECK(cfg.bandwidth() == doctest::Approx(1.0e9).epsilon(1e-12));
  CHECK(cfg.sampling_window() == doctest::Approx(32e-6).epsilon(1e-12));
  CHECK(cfg.sampling_window() <= cfg.tc);
  CHECK_NOTHROW(cfg.validate());

  // L-shaped array with half-wavelength spacing.
  REQUIRE(cfg.rx_positions.size() == 3);
  const double half = cfg.wavelength() / 2;
  CHECK((cfg.rx_positions[1] - cfg.rx_positions[0]).norm() == doctest::Approx(half).epsilon(1e-12));
  CHECK((cfg.rx_positions[2] - cfg.rx_positions[0]).norm() == doctest::Approx(half).epsilon(1e-12));
  CHECK(std::abs((cfg.rx_positions[1] - cfg.rx_positions[0]).dot(cfg.rx_positions[2] - cfg.rx_positions[0])) < 1e-15);
}

TEST_CASE("config validation names the violated invariant") {
  auto expect_invalid = [](RadarConfig cfg) {
    try {
      cfg.validate();
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
      CHECK(std::string(e.what()).find("invalid radar config") != std::string::npos);
    }
  };
  RadarConfig a = make_default_config();
  a.f_max = a.f_min;
  expect_invalid(a);
  RadarConfig b = make_default_config();
  b.nts = 256;  // 128 us window > tc
  expect_invalid(b);
  RadarConfig c = make_default_config();
  c.pn = 1;
  expect_invalid(c);
  RadarConfig d = make_default_config();
  d.prt = d.tc / 2;
  expect_invalid(d);
}

TEST_CASE("wavelength and velocity resolution") {
  const RadarConfig cfg = make_default_config();
  CHECK(cfg.wavelength() == doctest::Approx(5.169e-3).epsilon(1e-3));
  CHECK(cfg.velocity_resolution() == doctest::Approx(0.3155).epsilon(1e-3));
  CHECK(cfg.max_velocity() == doctest::Approx(20.19).epsilon(1e-3));
}

TEST_CASE("gesture names round trip") {
  for (int c = 0; c < kNumClasses; ++c) {
    const auto g = gesture_from_code(c);
    CHECK(gesture_from_name(gesture_name(g)) == g);
  }
  CHECK_FALSE(gesture_from_name("wave").has_value());
  CHECK_THROWS_AS(gesture_from_code(5), Error);
}

TEST_CASE("push approaches the radar monotonically and pull mirrors it in time") {
  for (std::uint64_t seed : {0ull, 7ull, 12345ull}) {
    const auto push = synth_gesture_trajectory(GestureClass::kPush, seed, 1.5);
    const auto pull = synth_gesture_trajectory(GestureClass::kPull, seed, 1.5);
    REQUIRE(push.size() == static_cast<std::size_t>(kSequenceLength));
    REQUIRE(pull.size() == static_cast<std::size_t>(kSequenceLength));
    for (int t = 1; t < kSequenceLength; ++t) {
      CHECK(radial_distance(push[t].position) < radial_distance(push[t - 1].position));
    }
    const double travel = radial_distance(push.front().position) - radial_distance(push.back().position);
    CHECK(travel == doctest::Approx(0.4).epsilon(0.25));
    for (int t = 0; t < kSequenceLength; ++t) {
      const double a = radial_distance(pull[t].position);
      const double b = radial_distance(push[kSequenceLength - 1 - t].position);
      CHECK(std::abs(a - b) < 0.02);
    }
  }
}

TEST_CASE("circle orientations have opposite signed area") {
  auto signed_area = [](const std::vector<HandSample>& path) {
    // Person faces the radar along -y, so project onto the x-z plane.
    double a = 0;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const auto& p = path[i].position;
      const auto& q = path[(i + 1) % path.size()].position;
      a += p.x() * q.z() - q.x() * p.z();
    }
    return 0.5 * a;
  };
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    for (double r : {1.0, 1.5, 2.0}) {
      const double cw = signed_area(synth_gesture_trajectory(GestureClass::kClockwise, seed, r));
      const double acw = signed_area(synth_gesture_trajectory(GestureClass::kAnticlockwise, seed, r));
      CHECK(cw * acw < 0);
      // Radius about 0.25 m: area near pi r^2.
      CHECK(std::abs(cw) == doctest::Approx(kPi * 0.0625).epsilon(0.35));
    }
  }
}

TEST_CASE("swipe travels horizontally about 0.6 m") {
  const auto path = synth_gesture_trajectory(GestureClass::kSwipe, 3, 1.5);
  const Vec3 d = path.back().position - path.front().position;
  CHECK(std::hypot(d.x(), d.y()) == doctest::Approx(0.6).epsilon(0.25));
  CHECK(std::abs(d.z()) < 0.1);
}

TEST_CASE("trajectory velocities are finite differences times the frame rate") {
  const RadarConfig cfg = make_default_config();
  const auto path = synth_gesture_trajectory(GestureClass::kClockwise, 11, 1.2);
  for (int t = 1; t + 1 < kSequenceLength; ++t) {
    const Vec3 fd = (path[t + 1].position - path[t - 1].position) * (cfg.frame_rate / 2.0);
    const Vec3 bd = (path[t].position - path[t - 1].position) * cfg.frame_rate;
    const Vec3 v = path[t].velocity;
    CHECK(((v - fd).norm() < 1e-9 || (v - bd).norm() < 1e-9));
  }
}

TEST_CASE("trajectory rejects ranges outside [1, 2] m and is seed deterministic") {
  CHECK_THROWS_AS(synth_gesture_trajectory(GestureClass::kSwipe, 0, 0.99), Error);
  CHECK_THROWS_AS(synth_gesture_trajectory(GestureClass::kSwipe, 0, 2.01), Error);
  try {
    synth_gesture_trajectory(GestureClass::kSwipe, 0, 2.5);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("range") != std::string::npos);
  }
  const auto a = synth_gesture_trajectory(GestureClass::kPull, 42, 1.7);
  const auto b = synth_gesture_trajectory(GestureClass::kPull, 42, 1.7);
  const auto c = synth_gesture_trajectory(GestureClass::kPull, 43, 1.7);
  bool differs = false;
  for (int t = 0; t < kSequenceLength; ++t) {
    CHECK(a[t].position == b[t].position);
    differs |= a[t].position != c[t].position;
  }
  CHECK(differs);
}

TEST_CASE("skeleton arm follows the hand with constant segment lengths") {
  for (auto hand : {Handedness::kRight, Handedness::kLeft}) {
    for (int cls = 0; cls < kNumClasses; ++cls) {
      const auto plan = plan_recording(gesture_from_code(cls), 100 + cls, 1.5);
      BodyPose body = plan.body;
      body.hand = hand;
      const int sh = hand == Handedness::kRight ? kRightShoulder : kLeftShoulder;
      const int el = hand == Handedness::kRight ? kRightElbow : kLeftElbow;
      const int wr = hand == Handedness::kRight ? kRightWrist : kLeftWrist;
      for (const auto& s : plan.trajectory) {
        const auto res = trajectory_to_skeleton(s.position, body, 0.0, nullptr);
        const auto& j = res.frame.joints;
        CHECK((j[wr] - j[sh]).norm() <= kUpperArm + kForearm + 1e-12);
        if (!res.clamped) {
          CHECK((j[wr] - s.position).norm() < 1e-12);
          CHECK(std::abs((j[el] - j[sh]).norm() - kUpperArm) < 1e-9);
          CHECK(std::abs((j[wr] - j[el]).norm() - kForearm) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("skeleton clamps an unreachable hand and flags it") {
  BodyPose body;
  body.anchor = Vec3(0, 2, 1.2);
  const Vec3 shoulder = body.shoulder(Handedness::kRight);
  const auto res = trajectory_to_skeleton(shoulder + Vec3(0, -2, 0), body, 0.0, nullptr);
  CHECK(res.clamped);
  const auto& j = res.frame.joints;
  CHECK((j[kRightWrist] - shoulder).norm() == doctest::Approx(kUpperArm + kForearm).epsilon(1e-12));
  // Fully extended arm is straight.
  const Vec3 a = j[kRightElbow] - shoulder;
  const Vec3 b = j[kRightWrist] - shoulder;
  CHECK(a.cross(b).norm() < 1e-9);
}

TEST_CASE("hand at the shoulder collapses the arm") {
  BodyPose body;
  body.anchor = Vec3(0, 2, 1.2);
  const Vec3 shoulder = body.shoulder(Handedness::kRight);
  const auto res = trajectory_to_skeleton(shoulder, body, 0.0, nullptr);
  const auto& j = res.frame.joints;
  CHECK((j[kRightShoulder] - shoulder).norm() < 1e-12);
  // Wrist, elbow and shoulder stay on one line.
  const Vec3 a = j[kRightElbow] - j[kRightShoulder];
  const Vec3 b = j[kRightWrist] - j[kRightShoulder];
  CHECK(a.cross(b).norm() < 1e-9);
  CHECK((j[kRightWrist] - shoulder).norm() <= kUpperArm - kForearm + 1e-9);
}

TEST_CASE("noiseless skeletons are bit identical; noisy ones depend on the stream") {
  const auto plan = plan_recording(GestureClass::kSwipe, 5, 1.5);
  const auto a = trajectory_to_skeleton(plan.trajectory[10].position, plan.body, 0.0, nullptr);
  const auto b = trajectory_to_skeleton(plan.trajectory[10].position, plan.body, 0.0, nullptr);
  for (int k = 0; k < kNumJoints; ++k) CHECK(a.frame.joints[k] == b.frame.joints[k]);

  Rng r1(9), r2(9);
  const auto n1 = trajectory_to_skeleton(plan.trajectory[10].position, plan.body, 0.005, &r1);
  const auto n2 = trajectory_to_skeleton(plan.trajectory[10].position, plan.body, 0.005, &r2);
  double dev = 0;
  for (int k = 0; k < kNumJoints; ++k) {
    CHECK(n1.frame.joints[k] == n2.frame.joints[k]);
    dev = std::max(dev, (n1.frame.joints[k] - a.frame.joints[k]).norm());
  }
  CHECK(dev > 0);
  CHECK(dev < 0.05);
}

TEST_CASE("empty scene without noise is exactly zero") {
  const RadarConfig cfg = make_default_config();
  const auto cube = simulate_raw_frame(cfg, {}, MountPose{}, NoiseOptions{false, 20.0}, nullptr);
  CHECK(cube.samples.size() == static_cast<std::size_t>(cfg.n_rx * cfg.pn * cfg.nts));
  for (float s : cube.samples) CHECK(s == 0.0f);
}

TEST_CASE("scatterer at the radar is rejected") {
  Scatterer s;
  s.position = MountPose{}.position();
  CHECK_THROWS_AS(simulate_raw_frame(make_default_config(), {s}, MountPose{}, NoiseOptions{false, 20.0}), Error);
}

TEST_CASE("beat frequency of a static scatterer at 1.5 m falls in range bin 5") {
  const RadarConfig cfg = make_default_config();
  // 156 354 Hz with the exact speed of light, 156 250 Hz with c = 3e8.
  CHECK(cfg.beat_frequency(1.5) == doctest::Approx(156250.0).epsilon(1e-3));
  CHECK(std::lround(cfg.beat_frequency(1.5) * cfg.nts / cfg.fs) == 5);
  const auto cube = simulate_raw_frame(cfg, {boresight_scatterer(1.5)}, MountPose{}, NoiseOptions{false, 20.0});
  for (int rx = 0; rx < cfg.n_rx; ++rx) CHECK(dft_range_argmax(cube, rx, 0) == 5);
}

TEST_CASE("beat-frequency law over [0.5, 5] m against a direct DFT") {
  const RadarConfig cfg = make_default_config();
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const double r = rng.uniform(0.5, 5.0);
    const double bin = cfg.beat_frequency(r) * cfg.nts / cfg.fs;
    // Skip ranges whose beat falls on a bin boundary where rounding is ambiguous.
    if (std::abs(bin - std::floor(bin) - 0.5) < 0.1) continue;
    const auto cube = simulate_raw_frame(cfg, {boresight_scatterer(r)}, MountPose{}, NoiseOptions{false, 20.0});
    CAPTURE(r);
    CHECK(dft_range_argmax(cube, 0, 3) == std::lround(bin));
  }
}

TEST_CASE("receding scatterer at 1 m/s lands three Doppler bins above zero") {
  const RadarConfig cfg = make_default_config();
  CHECK(std::lround(1.0 / cfg.velocity_resolution()) == 3);
  const auto cube = simulate_raw_frame(cfg, {boresight_scatterer(1.5, 1.0)}, MountPose{}, NoiseOptions{false, 20.0});
  // Oracle: DFT across chirps of the range-bin-5 coefficient.
  std::vector<std::complex<double>> slow(cfg.pn);
  for (int p = 0; p < cfg.pn; ++p) {
    std::complex<double> acc = 0;
    for (int n = 0; n < cfg.nts; ++n)
      acc += static_cast<double>(cube.at(0, p, n)) * std::polar(1.0, -2 * kPi * 5 * n / cfg.nts);
    slow[p] = acc;
  }
  int best = 0;
  double best_mag = -1;
  for (int k = 0; k < cfg.pn; ++k) {
    std::complex<double> acc = 0;
    for (int p = 0; p < cfg.pn; ++p) acc += slow[p] * std::polar(1.0, -2 * kPi * k * p / cfg.pn);
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  const int shifted = (best + cfg.pn / 2) % cfg.pn;
  CHECK(shifted - cfg.pn / 2 == 3);

  const auto m = dsp::intensity_map(dsp::range_doppler_fft(cube));
  CHECK(rdi_argmax(m) == std::pair<int, int>{5, cfg.pn / 2 + 3});
}

TEST_CASE("Doppler law for |v| below the unambiguous limit at 30 dB") {
  const RadarConfig cfg = make_default_config();
  Rng rng(77);
  Rng noise_rng(78);
  for (int trial = 0; trial < 25; ++trial) {
    const double v = rng.uniform(-0.95, 0.95) * cfg.max_velocity();
    const double off = v / cfg.velocity_resolution();
    if (std::abs(off - std::floor(off) - 0.5) < 0.1) continue;
    const auto cube =
        simulate_raw_frame(cfg, {boresight_scatterer(2.0, v)}, MountPose{}, NoiseOptions{true, 30.0}, &noise_rng);
    const auto m = dsp::intensity_map(dsp::range_doppler_fft(cube));
    CAPTURE(v);
    CHECK(rdi_argmax(m).second - cfg.pn / 2 == std::lround(off));
  }
}

TEST_CASE("amplitude falls with the square of range") {
  const RadarConfig cfg = make_default_config();
  const auto near = simulate_raw_frame(cfg, {boresight_scatterer(1.0)}, MountPose{}, NoiseOptions{false, 20.0});
  const auto far = simulate_raw_frame(cfg, {boresight_scatterer(2.0)}, MountPose{}, NoiseOptions{false, 20.0});
  auto peak = [](const RawRadarCube& c) {
    double m = 0;
    for (float s : c.samples) m = std::max(m, std::abs(static_cast<double>(s)));
    return m;
  };
  CHECK(peak(near) / peak(far) == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("dataset generation is deterministic, balanced and uses disjoint seeds") {
  training::DatasetSpec spec;
  spec.train_per_class = 2;
  spec.eval_per_class = 1;
  spec.seed = 5;
  testing_util::TempDir a("ds_a"), b("ds_b");
  training::generate_dataset(a.str(), spec, 1);
  training::generate_dataset(b.str(), spec, 2);
  const auto ta = testing_util::tree_contents(a.path());
  const auto tb = testing_util::tree_contents(b.path());
  CHECK(ta.size() == tb.size());
  CHECK(ta == tb);

  CHECK(training::split_size(spec, "train") == 10);
  CHECK(training::split_size(spec, "eval") == 5);
  std::array<int, kNumClasses> hist{};
  std::set<std::uint64_t> train_seeds;
  for (int i = 0; i < 10; ++i) {
    const auto meta = training::parse_meta_json(
        testing_util::slurp(a.path() / "train" / training::recording_id("train", i) / "meta.json"), "meta.json");
    hist[static_cast<int>(meta.label)]++;
    train_seeds.insert(meta.seed);
  }
  for (int h : hist) CHECK(h == 2);
  for (int i = 0; i < 5; ++i) CHECK(train_seeds.count(training::recording_seed(spec.seed, "eval", i)) == 0);
  CHECK(training::recording_seed(spec.seed, "train", 0) != training::recording_seed(spec.seed, "eval", 0));
}

TEST_CASE("default dataset spec sizes") {
  training::DatasetSpec spec;
  CHECK(training::split_size(spec, "train") == 1000);
  CHECK(training::split_size(spec, "eval") == 250);
  CHECK(spec.eval_clutter == 2);
}

TEST_CASE("unwritable dataset root names the path") {
  training::DatasetSpec spec;
  spec.train_per_class = 1;
  spec.eval_per_class = 1;
  testing_util::TempDir dir("ro");
  const std::string blocker = dir / "file";
  std::ofstream(blocker) << "x";
  try {
    training::generate_dataset(blocker + "/sub", spec, 1);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(blocker) != std::string::npos);
  }
}
