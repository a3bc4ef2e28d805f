#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "radargest/common/error.hpp"
#include "radargest/radar_dsp/radar_dsp.hpp"

using namespace radargest;
using namespace radargest::dsp;
using scene::Vec3;
using scene::make_default_config;

namespace {

constexpr double kPi = 3.14159265358979323846;
double deg(double d) { return d * kPi / 180.0; }

std::vector<cdouble> naive_dft(const std::vector<cdouble>& x) {
  const std::size_t n = x.size();
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += x[j] * std::polar(1.0, -2 * kPi * double(k * j % n) / double(n));
    out[k] = acc;
  }
  return out;
}

RawRadarCube random_cube(const RadarConfig& cfg, Rng& rng) {
  auto cube = RawRadarCube::zeros(cfg);
  for (auto& s : cube.samples) s = static_cast<float>(rng.normal());
  return cube;
}

IntensityMap random_map(int nr, int nd, Rng& rng) {
  IntensityMap m{nr, nd, std::vector<double>(static_cast<std::size_t>(nr) * nd)};
  for (auto& v : m.values) v = rng.uniform();
  return m;
}

Eigen::MatrixXcd outer(const Eigen::VectorXcd& a) { return a * a.adjoint(); }

}  // namespace

TEST_CASE("FFT matches the naive DFT on random input") {
  Rng rng(1);
  for (std::size_t n : {1u, 2u, 8u, 64u, 128u, 256u}) {
    std::vector<cdouble> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    auto y = x;
    fft(y);
    const auto ref = naive_dft(x);
    double num = 0, den = 0;
    for (std::size_t k = 0; k < n; ++k) {
      num += std::norm(y[k] - ref[k]);
      den += std::norm(ref[k]);
    }
    CHECK(std::sqrt(num / den) < 1e-12);
  }
}

TEST_CASE("FFT rejects lengths that are not powers of two") {
  std::vector<cdouble> x(48);
  CHECK_THROWS_AS(fft(x), Error);
  CHECK(is_power_of_two(64));
  CHECK_FALSE(is_power_of_two(96));
  CHECK_FALSE(is_power_of_two(0));
}

TEST_CASE("range-Doppler maps equal a direct 2D DFT on 100 random cubes") {
  const RadarConfig cfg = make_default_config();
  Rng rng(3);
  const auto wr = hann_window(cfg.nts);
  const auto wd = hann_window(cfg.pn);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto cube = random_cube(cfg, rng);
    const auto maps = range_doppler_fft(cube);
    REQUIRE(maps.n_range == cfg.nts / 2);
    REQUIRE(maps.n_doppler == cfg.pn);
    const int rx = trial % cfg.n_rx;
    // Oracle on one antenna, every trial; full cost O(N^2) per axis.
    std::vector<std::vector<cdouble>> range_rows(cfg.pn);
    for (int p = 0; p < cfg.pn; ++p) {
      std::vector<cdouble> x(cfg.nts);
      for (int n = 0; n < cfg.nts; ++n) x[n] = wr[n] * static_cast<double>(cube.at(rx, p, n));
      range_rows[p] = naive_dft(x);
    }
    double num = 0, den = 0;
    for (int r = 0; r < maps.n_range; ++r) {
      std::vector<cdouble> col(cfg.pn);
      for (int p = 0; p < cfg.pn; ++p) col[p] = wd[p] * range_rows[p][r];
      const auto dop = naive_dft(col);
      for (int d = 0; d < cfg.pn; ++d) {
        const cdouble ref = dop[(d + cfg.pn / 2) % cfg.pn];
        num += std::norm(maps.at(rx, r, d) - ref);
        den += std::norm(ref);
      }
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("impulse cube gives a flat spectrum without windows") {
  const RadarConfig cfg = make_default_config();
  auto cube = RawRadarCube::zeros(cfg);
  cube.samples[cube.index(0, 0, 0)] = 1.0f;
  const auto maps = range_doppler_fft(cube, FftOptions{false, false});
  for (int r = 0; r < maps.n_range; ++r)
    for (int d = 0; d < maps.n_doppler; ++d) CHECK(std::abs(maps.at(0, r, d)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("range-Doppler FFT rejects non power-of-two axes") {
  RadarConfig cfg = make_default_config();
  cfg.pn = 96;
  auto cube = RawRadarCube::zeros(cfg);
  CHECK_THROWS_AS(range_doppler_fft(cube), Error);
}

TEST_CASE("MTI subtracts the previous frame") {
  const RadarConfig cfg = make_default_config();
  Rng rng(4);
  const auto a = random_cube(cfg, rng);
  const auto zero = RawRadarCube::zeros(cfg);
  const auto same = mti_filter(a, a);
  for (float s : same.samples) CHECK(s == 0.0f);
  CHECK(mti_filter(a, zero).samples == a.samples);

  RadarConfig other = cfg;
  other.nts = 32;
  try {
    mti_filter(a, RawRadarCube::zeros(other));
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShape);
    const std::string msg = e.what();
    CHECK(msg.find(a.shape_string()) != std::string::npos);
    CHECK(msg.find(RawRadarCube::zeros(other).shape_string()) != std::string::npos);
  }
}

TEST_CASE("MTI suppresses a static scatterer by at least 40 dB") {
  const RadarConfig cfg = make_default_config();
  scene::Scatterer s;
  s.position = scene::MountPose{}.position() + Vec3(0.2, 1.5, 0.1);
  const scene::NoiseOptions quiet{false, 20.0};
  const auto f0 = scene::simulate_raw_frame(cfg, {s}, {}, quiet, nullptr, 0);
  const auto f1 = scene::simulate_raw_frame(cfg, {s}, {}, quiet, nullptr, 1);
  auto peak = [](const IntensityMap& m) { return *std::max_element(m.values.begin(), m.values.end()); };
  const double raw = peak(intensity_map(range_doppler_fft(f1)));
  const double mti = peak(intensity_map(range_doppler_fft(mti_filter(f1, f0))));
  CHECK(raw > 0);
  // Float storage of identical samples subtracts to exactly zero.
  CHECK((mti == 0.0 || 10 * std::log10(raw / mti) >= 40.0));
}

TEST_CASE("gate keeps the rectangle around a single peak, clipped to the map") {
  IntensityMap m{32, 128, std::vector<double>(32 * 128, 0.0)};
  m.at(10, 60) = 1.0;
  auto g = gate_detections(m);
  CHECK_FALSE(g.empty);
  CHECK(g.peak.range_bin == 10);
  CHECK(g.peak.doppler_bin == 60);
  int kept = 0;
  for (int r = 0; r < 32; ++r)
    for (int d = 0; d < 128; ++d) {
      const bool inside = std::abs(r - 10) <= 5 && std::abs(d - 60) <= 16;
      CHECK(g.mask[r * 128 + d] == inside);
      kept += g.mask[r * 128 + d];
    }
  CHECK(kept == 11 * 33);

  IntensityMap c{32, 128, std::vector<double>(32 * 128, 0.0)};
  c.at(31, 127) = 2.0;
  g = gate_detections(c);
  kept = 0;
  for (bool b : g.mask) kept += b;
  CHECK(kept == 6 * 17);
  CHECK(g.mask[31 * 128 + 127]);
  CHECK(g.mask[26 * 128 + 111]);
  CHECK_FALSE(g.mask[25 * 128 + 127]);
}

TEST_CASE("gate drops a weaker peak 20 range bins away") {
  IntensityMap m{32, 128, std::vector<double>(32 * 128, 0.0)};
  m.at(5, 64) = 1.0;
  m.at(25, 64) = std::pow(10.0, -0.3);
  const auto g = gate_detections(m);
  CHECK(g.mask[5 * 128 + 64]);
  CHECK_FALSE(g.mask[25 * 128 + 64]);
  const auto top = select_top_bins(m, g.mask, 25);
  REQUIRE(top.size() == 1);
  CHECK(top[0].range_bin == 5);
}

TEST_CASE("all-zero map gives an empty, flagged gate") {
  IntensityMap m{32, 128, std::vector<double>(32 * 128, 0.0)};
  const auto g = gate_detections(m);
  CHECK(g.empty);
  CHECK(std::none_of(g.mask.begin(), g.mask.end(), [](bool b) { return b; }));
}

TEST_CASE("top bins match a brute-force sort and stay inside the gate") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_map(32, 128, rng);
    const auto g = gate_detections(m);
    const auto top = select_top_bins(m, g.mask, 25);
    std::vector<DetectionBin> all;
    for (int r = 0; r < 32; ++r)
      for (int d = 0; d < 128; ++d)
        if (g.mask[r * 128 + d]) all.push_back({r, d, m.at(r, d)});
    std::sort(all.begin(), all.end(), [](const DetectionBin& a, const DetectionBin& b) {
      if (a.intensity != b.intensity) return a.intensity > b.intensity;
      return std::tie(a.range_bin, a.doppler_bin) < std::tie(b.range_bin, b.doppler_bin);
    });
    REQUIRE(top.size() == 25);
    for (int i = 0; i < 25; ++i) {
      CHECK(top[i].range_bin == all[i].range_bin);
      CHECK(top[i].doppler_bin == all[i].doppler_bin);
      CHECK(std::abs(top[i].range_bin - g.peak.range_bin) <= 5);
      CHECK(std::abs(top[i].doppler_bin - g.peak.doppler_bin) <= 16);
    }
  }
}

TEST_CASE("top bins: K = 1 is the argmax, fewer bins than K returns them all, ties by index") {
  Rng rng(6);
  auto m = random_map(32, 128, rng);
  std::vector<bool> all(m.values.size(), true);
  const auto one = select_top_bins(m, all, 1);
  REQUIRE(one.size() == 1);
  const auto it = std::max_element(m.values.begin(), m.values.end());
  CHECK(one[0].range_bin * 128 + one[0].doppler_bin == it - m.values.begin());

  IntensityMap sparse{32, 128, std::vector<double>(32 * 128, 0.0)};
  sparse.at(3, 3) = 1;
  sparse.at(4, 4) = 1;
  sparse.at(2, 9) = 0.5;
  const auto three = select_top_bins(sparse, all, 25);
  REQUIRE(three.size() == 3);
  CHECK(three[0].range_bin == 3);
  CHECK(three[1].range_bin == 4);
  CHECK(three[2].range_bin == 2);
}

TEST_CASE("window covariance is Hermitian PSD and rank one for a constant snapshot") {
  Rng rng(7);
  RangeDopplerMaps maps{3, 32, 128, {}};
  maps.data.resize(3 * 32 * 128);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& v : maps.data) v = {rng.normal(), rng.normal()};
    const DetectionBin bin{static_cast<int>(rng.index(32)), static_cast<int>(rng.index(128)), 1.0};
    const auto c = window_covariance(maps, bin);
    CHECK(c == c.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }

  Eigen::VectorXcd v(3);
  v << cdouble(1, 2), cdouble(-0.5, 0.3), cdouble(0.1, -1);
  for (int r = 0; r < 32; ++r)
    for (int d = 0; d < 128; ++d)
      for (int rx = 0; rx < 3; ++rx) maps.at(rx, r, d) = v[rx];
  for (DetectionBin bin : {DetectionBin{10, 50, 1}, DetectionBin{0, 0, 1}, DetectionBin{31, 127, 1}}) {
    const auto c = window_covariance(maps, bin);
    CHECK((c - outer(v)).norm() < 1e-12);
  }
}

TEST_CASE("window covariance averages over the edge-clipped 5x3 window") {
  RangeDopplerMaps maps{3, 32, 128, std::vector<cdouble>(3 * 32 * 128, 0.0)};
  // Unit snapshot only at (0, 0); the corner window holds 3 x 2 cells.
  for (int rx = 0; rx < 3; ++rx) maps.at(rx, 0, 0) = 1.0;
  const auto c = window_covariance(maps, DetectionBin{0, 0, 1});
  CHECK(c(0, 0).real() == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  const auto mid = window_covariance(maps, DetectionBin{2, 1, 1});
  CHECK(mid(0, 0).real() == doctest::Approx(1.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("Bartlett recovers an on-grid source exactly and an off-grid one within a step") {
  const RadarConfig cfg = make_default_config();
  const BartlettBeamformer bf(cfg);
  const auto on = bf.estimate(outer(steering_vector(cfg, deg(20), deg(10))));
  CHECK(on.theta_azi == doctest::Approx(deg(20)).epsilon(1e-12));
  CHECK(on.theta_ele == doctest::Approx(deg(10)).epsilon(1e-12));

  const auto off = bf.estimate(outer(steering_vector(cfg, deg(21), deg(9))));
  CHECK(std::abs(off.theta_azi - deg(21)) <= deg(2) + 1e-12);
  CHECK(std::abs(off.theta_ele - deg(9)) <= deg(2) + 1e-12);

  // Every grid point recovers itself.
  for (double a = -60; a <= 60; a += 10)
    for (double e = -40; e <= 40; e += 10) {
      const auto est = bf.estimate(outer(steering_vector(cfg, deg(a), deg(e))));
      CAPTURE(a);
      CAPTURE(e);
      CHECK(est.theta_azi == doctest::Approx(deg(a)).epsilon(1e-9));
      CHECK(est.theta_ele == doctest::Approx(deg(e)).epsilon(1e-9));
    }
}

TEST_CASE("Bartlett spectrum equals the quadratic form and the estimate is its grid maximum") {
  const RadarConfig cfg = make_default_config();
  const BartlettBeamformer bf(cfg);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXcd x(3, 6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j) x(i, j) = {rng.normal(), rng.normal()};
    const Eigen::MatrixXcd c = x * x.adjoint() / 6.0;
    const auto est = bf.estimate(c);
    double best = -1;
    double best_a = 0, best_e = 0;
    for (double a : bf.azimuths())
      for (double e : bf.elevations()) {
        const auto s = steering_vector(cfg, a, e);
        const double p = (s.adjoint() * c * s)(0, 0).real();
        CHECK(bf.spectrum(c, a, e) == doctest::Approx(p).epsilon(1e-12));
        if (p > best + 1e-12 * std::abs(best)) {
          best = p;
          best_a = a;
          best_e = e;
        }
      }
    CHECK(est.spectrum_peak == doctest::Approx(best).epsilon(1e-9));
    CHECK(est.theta_azi == doctest::Approx(best_a));
    CHECK(est.theta_ele == doctest::Approx(best_e));
  }
}

TEST_CASE("identity covariance ties resolve to the grid minimum corner") {
  const RadarConfig cfg = make_default_config();
  const auto est = bartlett_doa(Eigen::MatrixXcd::Identity(3, 3), cfg);
  CHECK(est.theta_azi == doctest::Approx(deg(-60)).epsilon(1e-12));
  CHECK(est.theta_ele == doctest::Approx(deg(-44)).epsilon(1e-12));
}

TEST_CASE("Bartlett grid covers azimuth [-60, 60] and elevation [-44, 44] at 2 degrees") {
  const BartlettBeamformer bf(make_default_config());
  CHECK(bf.azimuths().size() == 61);
  CHECK(bf.elevations().size() == 45);
  CHECK(bf.elevations()[22] == doctest::Approx(0.0));
}

TEST_CASE("Bartlett rejects a non-Hermitian covariance") {
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Identity(3, 3);
  c(0, 1) = cdouble(0.5, 0);
  CHECK_THROWS_AS(bartlett_doa(c, make_default_config()), Error);
  c(1, 0) = cdouble(0.5, 1e-12);
  CHECK_NOTHROW(bartlett_doa(c, make_default_config()));
}

TEST_CASE("spherical to ground worked examples") {
  scene::MountPose flat;
  flat.h = 0;
  CHECK((spherical_to_ground(2, 0, 0, flat) - Vec3(0, 2, 0)).norm() < 1e-12);
  CHECK((spherical_to_ground(2, deg(30), 0, flat) - Vec3(1.0, 1.7320508, 0)).norm() < 1e-7);
  scene::MountPose tilted = flat;
  tilted.theta_tilt = deg(90);
  CHECK((spherical_to_ground(2, 0, 0, tilted) - Vec3(0, 0, -2)).norm() < 1e-12);
  scene::MountPose offset;
  offset.x_r = 0.5;
  offset.y_r = -1;
  offset.h = 1.2;
  CHECK((spherical_to_ground(2, 0, 0, offset) - Vec3(0.5, 1, 1.2)).norm() < 1e-12);
}

TEST_CASE("spherical to ground is an isometry about the radar position") {
  Rng rng(9);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    scene::MountPose m;
    m.theta_tilt = rng.uniform(-kPi / 2, kPi / 2);
    m.x_r = rng.uniform(-3, 3);
    m.y_r = rng.uniform(-3, 3);
    m.h = rng.uniform(0, 3);
    const double r = rng.uniform(0.1, 10);
    const auto p = spherical_to_ground(r, rng.uniform(-kPi, kPi), rng.uniform(-kPi / 2, kPi / 2), m);
    worst = std::max(worst, std::abs((p - m.position()).norm() - r));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("ground transform inverts the mount transform") {
  scene::MountPose m;
  m.theta_tilt = deg(15);
  m.x_r = 0.2;
  const Vec3 p = spherical_to_ground(1.7, deg(12), deg(-8), m);
  const Vec3 local = m.to_radar_frame(p);
  CHECK(local.norm() == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(std::atan2(local.x(), local.y()) == doctest::Approx(deg(12)).epsilon(1e-12));
  CHECK(std::asin(local.z() / local.norm()) == doctest::Approx(deg(-8)).epsilon(1e-12));
}

TEST_CASE("point cloud assembly: truncation, padding and empty frames") {
  Rng rng(10);
  std::vector<RadarPoint> pts(70);
  for (auto& p : pts) p = {rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.uniform(0.01, 1)};
  auto sorted = pts;
  std::stable_sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.intensity > b.intensity; });
  const auto cloud = assemble_point_cloud(pts);
  REQUIRE(cloud.points.size() == 64);
  CHECK(cloud.valid_count == 64);
  for (int i = 0; i < 64; ++i) CHECK(cloud.points[i] == sorted[i]);

  const std::vector<RadarPoint> ten(pts.begin(), pts.begin() + 10);
  const auto padded = assemble_point_cloud(ten);
  CHECK(padded.points.size() == 64);
  CHECK(padded.valid_count == 10);
  for (int i = 1; i < 10; ++i) CHECK(padded.points[i - 1].intensity >= padded.points[i].intensity);
  for (int i = 10; i < 64; ++i) CHECK(padded.points[i] == RadarPoint{});

  const auto empty = assemble_point_cloud({});
  CHECK(empty.points.size() == 64);
  CHECK(empty.valid_count == 0);
  for (const auto& p : empty.points) CHECK(p == RadarPoint{});
}

TEST_CASE("frame pipeline puts the strongest point near the hand") {
  const RadarConfig cfg = make_default_config();
  const scene::MountPose mount;
  const FramePipeline pipe(cfg, mount);
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 truth = mount.position() + Vec3(rng.uniform(-0.5, 0.5), rng.uniform(1.0, 2.0), rng.uniform(-0.4, 0.4));
    scene::Scatterer s;
    s.position = truth;
    s.velocity = (truth - mount.position()).normalized() * rng.uniform(-2.0, 2.0);
    if (std::abs(s.velocity.norm()) < 0.5) s.velocity *= 0.5 / std::max(s.velocity.norm(), 1e-3);
    const scene::NoiseOptions noise{true, 30.0};
    scene::Scatterer s0 = s;
    s0.position -= s.velocity / cfg.frame_rate;
    const auto prev = scene::simulate_raw_frame(cfg, {s0}, mount, noise, &rng, 0);
    const auto curr = scene::simulate_raw_frame(cfg, {s}, mount, noise, &rng, 1);
    const auto cloud = pipe.process(curr, prev);
    REQUIRE(cloud.valid_count > 0);
    const auto& p = cloud.points[0];
    CAPTURE(trial);
    CHECK((Vec3(p.x, p.y, p.z) - truth).norm() < 0.35);
    CHECK(cloud.points.size() == 64);
    CHECK(pipe.process(curr, prev) == cloud);
  }
}

TEST_CASE("Doppler sign: approaching is negative, receding positive") {
  const RadarConfig cfg = make_default_config();
  const scene::MountPose mount;
  const FramePipeline pipe(cfg, mount);
  for (double v : {-1.5, 1.5}) {
    scene::Scatterer s;
    s.position = mount.position() + Vec3(0, 1.5, 0);
    s.velocity = Vec3(0, v, 0);
    scene::Scatterer s0 = s;
    s0.position -= s.velocity / cfg.frame_rate;
    const scene::NoiseOptions quiet{false, 20.0};
    const auto cloud = pipe.process(scene::simulate_raw_frame(cfg, {s}, mount, quiet, nullptr, 1),
                                    scene::simulate_raw_frame(cfg, {s0}, mount, quiet, nullptr, 0));
    REQUIRE(cloud.valid_count > 0);
    CHECK(cloud.points[0].d * v > 0);
    CHECK(cloud.points[0].d == doctest::Approx(v).epsilon(0.25));
  }
}

TEST_CASE("static-only scene gives an empty cloud after MTI without noise") {
  const RadarConfig cfg = make_default_config();
  const scene::MountPose mount;
  scene::Scatterer s;
  s.position = mount.position() + Vec3(0.3, 1.2, -0.2);
  const scene::NoiseOptions quiet{false, 20.0};
  const auto a = scene::simulate_raw_frame(cfg, {s}, mount, quiet, nullptr, 0);
  const auto b = scene::simulate_raw_frame(cfg, {s}, mount, quiet, nullptr, 1);
  const auto cloud = frame_pipeline(b, a, cfg, mount);
  CHECK(cloud.valid_count == 0);
  CHECK(cloud.points.size() == 64);
}

TEST_CASE("recording processing uses frame 1 as the MTI reference of frame 0") {
  const RadarConfig cfg = make_default_config();
  Rng rng(12);
  std::vector<RawRadarCube> cubes;
  for (int i = 0; i < 3; ++i) cubes.push_back(random_cube(cfg, rng));
  const FramePipeline pipe(cfg, scene::MountPose{});
  const auto clouds = process_recording(pipe, cubes);
  REQUIRE(clouds.size() == 3);
  CHECK(clouds[0] == pipe.process(cubes[0], cubes[1]));
  CHECK(clouds[2] == pipe.process(cubes[2], cubes[1]));
}
