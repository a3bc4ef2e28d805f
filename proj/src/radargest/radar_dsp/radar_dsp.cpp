#include "radargest/radar_dsp/radar_dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "radargest/common/error.hpp"

namespace radargest::dsp {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft(std::span<cdouble> data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) {
    fail(ErrorCode::kInvalidArgument, "FFT length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(len);
      const cdouble w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const cdouble u = data[start + k];
        const cdouble v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(length, 1.0);
  if (length <= 1) return w;
  for (int i = 0; i < length; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (length - 1));
  return w;
}

RawRadarCube mti_filter(const RawRadarCube& curr, const RawRadarCube& prev) {
  if (!curr.same_shape(prev) || curr.samples.size() != prev.samples.size()) {
    throw Error(ErrorCode::kShape, "MTI shape mismatch: current " + curr.shape_string() + " vs previous " +
                                       prev.shape_string());
  }
  RawRadarCube out = curr;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = curr.samples[i] - prev.samples[i];
  return out;
}

RangeDopplerMaps range_doppler_fft(const RawRadarCube& cube, const FftOptions& opts) {
  if (!is_power_of_two(static_cast<std::size_t>(cube.nts)) || !is_power_of_two(static_cast<std::size_t>(cube.pn))) {
    fail(ErrorCode::kInvalidArgument, "range-Doppler FFT needs power-of-two nts and pn, got " + cube.shape_string());
  }
  if (cube.samples.size() != static_cast<std::size_t>(cube.n_rx) * cube.pn * cube.nts) {
    throw Error(ErrorCode::kShape, "cube sample count does not match its shape " + cube.shape_string());
  }
  RangeDopplerMaps maps;
  maps.n_rx = cube.n_rx;
  maps.n_range = cube.nts / 2;
  maps.n_doppler = cube.pn;
  maps.data.assign(static_cast<std::size_t>(maps.n_rx) * maps.n_range * maps.n_doppler, cdouble{});

  const auto w_range = opts.window_range ? hann_window(cube.nts) : std::vector<double>(cube.nts, 1.0);
  const auto w_doppler = opts.window_doppler ? hann_window(cube.pn) : std::vector<double>(cube.pn, 1.0);
  std::vector<cdouble> fast(cube.nts);
  std::vector<cdouble> slow(cube.pn);
  std::vector<cdouble> range_profiles(static_cast<std::size_t>(maps.n_range) * cube.pn);

  for (int rx = 0; rx < cube.n_rx; ++rx) {
    for (int c = 0; c < cube.pn; ++c) {
      for (int t = 0; t < cube.nts; ++t) {
        const double v = cube.at(rx, c, t);
        if (!std::isfinite(v)) fail(ErrorCode::kNumeric, "non-finite sample in radar cube");
        fast[t] = cdouble(v * w_range[t], 0.0);
      }
      fft(fast);
      for (int r = 0; r < maps.n_range; ++r) range_profiles[static_cast<std::size_t>(r) * cube.pn + c] = fast[r];
    }
    for (int r = 0; r < maps.n_range; ++r) {
      for (int c = 0; c < cube.pn; ++c) slow[c] = range_profiles[static_cast<std::size_t>(r) * cube.pn + c] * w_doppler[c];
      fft(slow);
      for (int k = 0; k < cube.pn; ++k) maps.at(rx, r, (k + cube.pn / 2) % cube.pn) = slow[k];
    }
  }
  return maps;
}

IntensityMap intensity_map(const RangeDopplerMaps& maps) {
  IntensityMap rdi;
  rdi.n_range = maps.n_range;
  rdi.n_doppler = maps.n_doppler;
  rdi.values.assign(static_cast<std::size_t>(rdi.n_range) * rdi.n_doppler, 0.0);
  for (int rx = 0; rx < maps.n_rx; ++rx) {
    for (int r = 0; r < maps.n_range; ++r) {
      for (int d = 0; d < maps.n_doppler; ++d) rdi.at(r, d) += std::norm(maps.at(rx, r, d));
    }
  }
  return rdi;
}

GateResult gate_detections(const IntensityMap& rdi, const GateOptions& opts) {
  GateResult g;
  g.mask.assign(rdi.values.size(), false);
  double best = 0.0;
  bool found = false;
  for (int r = 0; r < rdi.n_range; ++r) {
    for (int d = 0; d < rdi.n_doppler; ++d) {
      if (rdi.at(r, d) > best) {
        best = rdi.at(r, d);
        g.peak = {r, d, best};
        found = true;
      }
    }
  }
  if (!found) {
    g.empty = true;
    return g;
  }
  const int r_lo = std::max(0, g.peak.range_bin - opts.half_range);
  const int r_hi = std::min(rdi.n_range - 1, g.peak.range_bin + opts.half_range);
  const int d_lo = std::max(0, g.peak.doppler_bin - opts.half_doppler);
  const int d_hi = std::min(rdi.n_doppler - 1, g.peak.doppler_bin + opts.half_doppler);
  for (int r = r_lo; r <= r_hi; ++r) {
    for (int d = d_lo; d <= d_hi; ++d) g.mask[static_cast<std::size_t>(r) * rdi.n_doppler + d] = true;
  }
  return g;
}

std::vector<DetectionBin> select_top_bins(const IntensityMap& rdi, const std::vector<bool>& mask, int k) {
  require(k >= 1, "select_top_bins needs K >= 1");
  require(mask.size() == rdi.values.size(), "gate mask size does not match the intensity map");
  std::vector<DetectionBin> bins;
  for (int r = 0; r < rdi.n_range; ++r) {
    for (int d = 0; d < rdi.n_doppler; ++d) {
      const std::size_t i = static_cast<std::size_t>(r) * rdi.n_doppler + d;
      if (mask[i] && rdi.values[i] > 0.0) bins.push_back({r, d, rdi.values[i]});
    }
  }
  auto order = [](const DetectionBin& a, const DetectionBin& b) {
    if (a.intensity != b.intensity) return a.intensity > b.intensity;
    if (a.range_bin != b.range_bin) return a.range_bin < b.range_bin;
    return a.doppler_bin < b.doppler_bin;
  };
  const std::size_t keep = std::min<std::size_t>(bins.size(), static_cast<std::size_t>(k));
  std::partial_sort(bins.begin(), bins.begin() + keep, bins.end(), order);
  bins.resize(keep);
  return bins;
}

Eigen::MatrixXcd window_covariance(const RangeDopplerMaps& maps, const DetectionBin& bin, int half_range,
                                   int half_doppler) {
  require(bin.range_bin >= 0 && bin.range_bin < maps.n_range && bin.doppler_bin >= 0 &&
              bin.doppler_bin < maps.n_doppler,
          "detection bin outside the range-Doppler map");
  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(maps.n_rx, maps.n_rx);
  Eigen::VectorXcd snapshot(maps.n_rx);
  int cells = 0;
  for (int r = bin.range_bin - half_range; r <= bin.range_bin + half_range; ++r) {
    if (r < 0 || r >= maps.n_range) continue;
    for (int d = bin.doppler_bin - half_doppler; d <= bin.doppler_bin + half_doppler; ++d) {
      if (d < 0 || d >= maps.n_doppler) continue;
      for (int m = 0; m < maps.n_rx; ++m) snapshot[m] = maps.at(m, r, d);
      cov.noalias() += snapshot * snapshot.adjoint();
      ++cells;
    }
  }
  cov /= static_cast<double>(cells);
  // Exact symmetry: the diagonal is real and the lower triangle mirrors the upper.
  for (int i = 0; i < maps.n_rx; ++i) {
    cov(i, i) = cdouble(cov(i, i).real(), 0.0);
    for (int j = i + 1; j < maps.n_rx; ++j) cov(j, i) = std::conj(cov(i, j));
  }
  return cov;
}

Eigen::VectorXcd steering_vector(const RadarConfig& cfg, double theta_azi, double theta_ele) {
  const Eigen::Vector3d u(std::cos(theta_ele) * std::sin(theta_azi), std::cos(theta_ele) * std::cos(theta_azi),
                          std::sin(theta_ele));
  const double k = 2.0 * kPi / cfg.wavelength();
  Eigen::VectorXcd a(cfg.n_rx);
  for (int m = 0; m < cfg.n_rx; ++m) a[m] = std::polar(1.0, -k * u.dot(cfg.rx_positions[m]));
  return a;
}

BartlettBeamformer::BartlettBeamformer(const RadarConfig& cfg, const DoaGridOptions& grid) : cfg_(cfg) {
  cfg_.validate();
  require(grid.step_deg > 0, "DoA grid step must be positive");
  auto axis = [&](double lo, double hi) {
    std::vector<double> v;
    const int n = static_cast<int>(std::floor((hi - lo) / grid.step_deg + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) v.push_back((lo + i * grid.step_deg) * kDeg);
    return v;
  };
  azimuths_ = axis(grid.azi_min_deg, grid.azi_max_deg);
  elevations_ = axis(grid.ele_min_deg, grid.ele_max_deg);
  steering_.reserve(azimuths_.size() * elevations_.size());
  for (double az : azimuths_) {
    for (double el : elevations_) steering_.push_back(steering_vector(cfg_, az, el));
  }
  const std::size_t n_grid = steering_.size();
  const auto m = static_cast<Eigen::Index>(cfg_.n_rx);
  basis_terms_ = static_cast<std::size_t>(m * m);
  basis_.assign(basis_terms_ * n_grid, 0.0);
  for (std::size_t g = 0; g < n_grid; ++g) {
    const Eigen::VectorXcd& a = steering_[g];
    std::size_t t = 0;
    for (Eigen::Index r = 0; r < m; ++r) basis_[t++ * n_grid + g] = std::norm(a(r));
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index k = r + 1; k < m; ++k) {
        const cdouble z = std::conj(a(r)) * a(k);
        basis_[t++ * n_grid + g] = z.real();
        basis_[t++ * n_grid + g] = z.imag();
      }
    }
  }
}

namespace {

void check_hermitian(const Eigen::MatrixXcd& cov, int n_rx) {
  if (cov.rows() != n_rx || cov.cols() != n_rx) {
    throw Error(ErrorCode::kShape, "covariance must be " + std::to_string(n_rx) + "x" + std::to_string(n_rx));
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  const double asym = (cov - cov.adjoint()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-9 * scale)) {
    std::ostringstream os;
    os << "covariance is not Hermitian (max |C - C^H| = " << asym << ")";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
}

double quadratic_form(const Eigen::VectorXcd& a, const Eigen::MatrixXcd& cov) {
  return (a.adjoint() * cov * a)(0, 0).real();
}

}  // namespace

double BartlettBeamformer::spectrum(const Eigen::MatrixXcd& cov, double theta_azi, double theta_ele) const {
  return quadratic_form(steering_vector(cfg_, theta_azi, theta_ele), cov);
}

AngleEstimate BartlettBeamformer::estimate(const Eigen::MatrixXcd& cov) const {
  check_hermitian(cov, cfg_.n_rx);
  // For Hermitian C, a^H C a = sum_r C_rr |a_r|^2
  //   + 2 sum_{r<k} (Re C_rk Re(a_r* a_k) - Im C_rk Im(a_r* a_k)),
  // a dot product with the per-grid-point terms in basis_.
  const auto m = static_cast<Eigen::Index>(cfg_.n_rx);
  std::vector<double> coef;
  coef.reserve(basis_terms_);
  for (Eigen::Index r = 0; r < m; ++r) coef.push_back(cov(r, r).real());
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index k = r + 1; k < m; ++k) {
      coef.push_back(2.0 * cov(r, k).real());
      coef.push_back(-2.0 * cov(r, k).imag());
    }
  }
  const std::size_t n_grid = azimuths_.size() * elevations_.size();
  std::vector<double> power(n_grid, 0.0);
  for (std::size_t t = 0; t < basis_terms_; ++t) {
    const double c = coef[t];
    const double* col = basis_.data() + t * n_grid;
    for (std::size_t g = 0; g < n_grid; ++g) power[g] += c * col[g];
  }
  AngleEstimate best;
  const std::size_t n_ele = elevations_.size();
  for (std::size_t g = 0; g < n_grid; ++g) {
    // Relative slack so that rounding noise on a flat spectrum keeps the
    // first (smallest) grid point.
    const double slack = 1e-12 * std::max(1.0, std::abs(best.spectrum_peak));
    if (g == 0 || power[g] > best.spectrum_peak + slack) {
      best.spectrum_peak = power[g];
      best.theta_azi = azimuths_[g / n_ele];
      best.theta_ele = elevations_[g % n_ele];
    }
  }
  return best;
}

AngleEstimate bartlett_doa(const Eigen::MatrixXcd& cov, const RadarConfig& cfg, const DoaGridOptions& grid) {
  return BartlettBeamformer(cfg, grid).estimate(cov);
}

Eigen::Vector3d spherical_to_ground(double r, double theta_azi, double theta_ele, const MountPose& mount) {
  require(r > 0.0, "spherical_to_ground needs r > 0");
  const Eigen::Vector3d radar(r * std::cos(theta_ele) * std::sin(theta_azi),
                              r * std::cos(theta_ele) * std::cos(theta_azi), r * std::sin(theta_ele));
  return mount.rotation() * radar + mount.position();
}

RadarPointCloud assemble_point_cloud(std::vector<RadarPoint> points, int n) {
  require(n >= 1, "point cloud size must be at least 1");
  std::stable_sort(points.begin(), points.end(),
                   [](const RadarPoint& a, const RadarPoint& b) { return a.intensity > b.intensity; });
  RadarPointCloud cloud;
  cloud.valid_count = static_cast<int>(std::min<std::size_t>(points.size(), static_cast<std::size_t>(n)));
  points.resize(static_cast<std::size_t>(n), RadarPoint{});
  cloud.points = std::move(points);
  return cloud;
}

FramePipeline::FramePipeline(const RadarConfig& cfg, const MountPose& mount, const PipelineOptions& opts)
    : cfg_(cfg), mount_(mount), opts_(opts), beamformer_(cfg, opts.grid) {
  require(opts.top_bins >= 1, "top-bins must be at least 1");
  require(opts.n_points >= 1, "n-points must be at least 1");
  mount_.validate();
}

RadarPointCloud FramePipeline::process(const RawRadarCube& curr, const RawRadarCube& prev) const {
  if (curr.n_rx != cfg_.n_rx || curr.pn != cfg_.pn || curr.nts != cfg_.nts) {
    throw Error(ErrorCode::kShape, "cube shape " + curr.shape_string() + " does not match the radar config");
  }
  const RawRadarCube moving = mti_filter(curr, prev);
  const RangeDopplerMaps maps = range_doppler_fft(moving, opts_.fft);
  IntensityMap rdi = intensity_map(maps);
  // Range bin 0 maps to r = 0 and carries only DC leakage.
  for (int d = 0; d < rdi.n_doppler; ++d) rdi.at(0, d) = 0.0;

  const GateResult gate = gate_detections(rdi, opts_.gate);
  std::vector<RadarPoint> points;
  if (!gate.empty) {
    const double range_res = cfg_.range_resolution();
    const double vel_res = cfg_.velocity_resolution();
    for (const DetectionBin& bin : select_top_bins(rdi, gate.mask, opts_.top_bins)) {
      const AngleEstimate angle = beamformer_.estimate(window_covariance(maps, bin));
      const double r = bin.range_bin * range_res;
      const Eigen::Vector3d p = spherical_to_ground(r, angle.theta_azi, angle.theta_ele, mount_);
      RadarPoint pt;
      pt.x = p.x();
      pt.y = p.y();
      pt.z = p.z();
      pt.d = (bin.doppler_bin - cfg_.pn / 2) * vel_res;
      pt.intensity = bin.intensity;
      points.push_back(pt);
    }
  }
  return assemble_point_cloud(std::move(points), opts_.n_points);
}

RadarPointCloud frame_pipeline(const RawRadarCube& curr, const RawRadarCube& prev, const RadarConfig& cfg,
                               const MountPose& mount, const PipelineOptions& opts) {
  return FramePipeline(cfg, mount, opts).process(curr, prev);
}

std::vector<RadarPointCloud> process_recording(const FramePipeline& pipeline, const std::vector<RawRadarCube>& cubes) {
  std::vector<RadarPointCloud> clouds;
  clouds.reserve(cubes.size());
  for (std::size_t t = 0; t < cubes.size(); ++t) {
    if (cubes.size() == 1) {
      clouds.push_back(pipeline.process(cubes[0], RawRadarCube::zeros(pipeline.config(), 0)));
      continue;
    }
    const RawRadarCube& prev = t == 0 ? cubes[1] : cubes[t - 1];
    clouds.push_back(pipeline.process(cubes[t], prev));
  }
  return clouds;
}

}  // namespace radargest::dsp
