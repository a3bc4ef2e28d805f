#include "radargest/multiview_geom/multiview_geom.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "json.hpp"
#include "radargest/common/error.hpp"

namespace radargest::geom {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& t) {
  Eigen::Matrix3d s;
  s << 0, -t.z(), t.y(),
       t.z(), 0, -t.x(),
       -t.y(), t.x(), 0;
  return s;
}

Eigen::Vector3d homogeneous(const Eigen::Vector2d& x) { return {x.x(), x.y(), 1.0}; }

double line_distance(const Eigen::Vector3d& line, const Eigen::Vector2d& x) {
  const double n = std::hypot(line.x(), line.y());
  if (n < 1e-300) return 0.0;
  return std::abs(line.dot(homogeneous(x))) / n;
}

}  // namespace

Eigen::Matrix<double, 3, 4> CameraModel::projection() const {
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = rotation;
  rt.col(3) = translation;
  return intrinsics * rt;
}

void CameraModel::validate() const {
  if (std::abs(rotation.determinant() - 1.0) > 1e-9 ||
      (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    fail(ErrorCode::kInvalidArgument, "camera rotation is not orthonormal with determinant 1");
  }
  if (std::abs(intrinsics(2, 2) - 1.0) > 1e-12 || intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 ||
      intrinsics(2, 1) != 0.0) {
    fail(ErrorCode::kInvalidArgument, "camera intrinsics must be upper triangular with K[2][2] = 1");
  }
}

Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d x_cam = cam.rotation * p + cam.translation;
  if (x_cam.z() <= 1e-9) fail(ErrorCode::kInvalidArgument, "point is behind or on the camera plane");
  const Eigen::Vector3d x = cam.intrinsics * x_cam;
  return {x.x() / x.z(), x.y() / x.z()};
}

Eigen::Matrix3d fundamental_from_calib(const CameraModel& cam_a, const CameraModel& cam_b) {
  const double baseline = (cam_a.center() - cam_b.center()).norm();
  if (baseline < 1e-12) fail(ErrorCode::kInvalidArgument, "camera centres coincide; epipolar geometry undefined");
  const Eigen::Matrix3d r_rel = cam_b.rotation * cam_a.rotation.transpose();
  const Eigen::Vector3d t_rel = cam_b.translation - r_rel * cam_a.translation;
  const Eigen::Matrix3d essential = skew(t_rel) * r_rel;
  Eigen::Matrix3d f = cam_b.intrinsics.inverse().transpose() * essential * cam_a.intrinsics.inverse();
  return f / f.norm();
}

double epipolar_line_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& x_a, const Eigen::Vector2d& x_b) {
  return line_distance(f * homogeneous(x_a), x_b);
}

double epipolar_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& x_a, const Eigen::Vector2d& x_b) {
  const double d_b = line_distance(f * homogeneous(x_a), x_b);
  const double d_a = line_distance(f.transpose() * homogeneous(x_b), x_a);
  return 0.5 * (d_a + d_b);
}

std::vector<PersonMatch> match_across_views(const std::vector<std::vector<PersonKeypoints>>& detections,
                                            const std::vector<Eigen::Matrix3d>& fundamentals, double threshold_px) {
  require(detections.size() >= 2, "matching needs at least two views");
  require(fundamentals.size() == detections.size(), "need one fundamental matrix per view (view 0 to view v)");
  const auto& reference = detections[0];
  std::vector<PersonMatch> matches(reference.size());
  for (std::size_t p = 0; p < reference.size(); ++p) {
    matches[p].person_in_view.assign(detections.size(), -1);
    matches[p].cost.assign(detections.size(), 0.0);
    matches[p].person_in_view[0] = static_cast<int>(p);
  }

  for (std::size_t v = 1; v < detections.size(); ++v) {
    const auto& other = detections[v];
    struct Pair {
      double cost;
      std::size_t a;
      std::size_t b;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < reference.size(); ++a) {
      for (std::size_t b = 0; b < other.size(); ++b) {
        double sum = 0.0;
        int used = 0;
        const std::size_t joints = std::min(reference[a].size(), other[b].size());
        for (std::size_t j = 0; j < joints; ++j) {
          const auto& ka = reference[a][j];
          const auto& kb = other[b][j];
          if (ka.confidence <= 0.0 || kb.confidence <= 0.0) continue;
          sum += epipolar_distance(fundamentals[v], {ka.u, ka.v}, {kb.u, kb.v});
          ++used;
        }
        if (used > 0) pairs.push_back({sum / used, a, b});
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.cost < y.cost; });
    std::vector<bool> used_a(reference.size(), false);
    std::vector<bool> used_b(other.size(), false);
    for (const Pair& pr : pairs) {
      if (!(pr.cost < threshold_px)) break;
      if (used_a[pr.a] || used_b[pr.b]) continue;
      used_a[pr.a] = used_b[pr.b] = true;
      matches[pr.a].person_in_view[v] = static_cast<int>(pr.b);
      matches[pr.a].cost[v] = pr.cost;
    }
  }
  return matches;
}

std::vector<PersonMatch> match_across_views(const std::vector<std::vector<PersonKeypoints>>& detections,
                                            const std::vector<CameraModel>& cameras, double threshold_px) {
  require(cameras.size() == detections.size(), "need one camera per view");
  std::vector<Eigen::Matrix3d> fundamentals(cameras.size(), Eigen::Matrix3d::Zero());
  for (std::size_t v = 1; v < cameras.size(); ++v) fundamentals[v] = fundamental_from_calib(cameras[0], cameras[v]);
  return match_across_views(detections, fundamentals, threshold_px);
}

Eigen::Vector3d triangulate(const std::vector<Observation>& observations) {
  require(observations.size() >= 2, "triangulation needs at least two observations");
  // Solving about the centroid of the camera centres makes the result
  // equivariant under rigid motions of the whole rig, noise included.
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (const auto& o : observations) origin += o.camera.center();
  origin /= static_cast<double>(observations.size());
  Eigen::MatrixXd a(2 * observations.size(), 4);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& cam = observations[i].camera;
    // Normalised image coordinates keep the system well conditioned.
    const Eigen::Vector3d x = cam.intrinsics.inverse() * homogeneous(observations[i].pixel);
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = cam.rotation;
    p.col(3) = cam.translation + cam.rotation * origin;
    Eigen::RowVector4d r0 = x.x() / x.z() * p.row(2) - p.row(0);
    Eigen::RowVector4d r1 = x.y() / x.z() * p.row(2) - p.row(1);
    a.row(2 * i) = r0 / r0.norm();
    a.row(2 * i + 1) = r1 / r1.norm();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double condition = s[2] > 0 ? s[0] / s[2] : std::numeric_limits<double>::infinity();
  if (!(condition <= 1e12)) {
    fail(ErrorCode::kNumeric, "degenerate triangulation geometry (condition number exceeds 1e12)");
  }
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h[3]) < 1e-15 * h.norm()) fail(ErrorCode::kNumeric, "triangulated point at infinity");
  return origin + h.head<3>() / h[3];
}

namespace {

Eigen::Matrix3d matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 9) {
    fail(ErrorCode::kFormat, std::string("rig entry field '") + what + "' must be 9 numbers (row-major 3x3)");
  }
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r * 3 + c).get<double>();
  }
  return m;
}

}  // namespace

std::vector<CameraModel> load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open rig file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kFormat, "malformed rig file '" + path + "': " + e.what(),
                static_cast<std::int64_t>(e.byte) - 1);
  }
  if (!j.is_array()) fail(ErrorCode::kFormat, "rig file '" + path + "' must hold a JSON list of cameras");
  std::vector<CameraModel> cams;
  try {
    for (const auto& e : j) {
      CameraModel c;
      c.intrinsics = matrix_from_json(e.at("intrinsics"), "intrinsics");
      c.rotation = matrix_from_json(e.at("rotation"), "rotation");
      const auto& t = e.at("translation");
      if (!t.is_array() || t.size() != 3) fail(ErrorCode::kFormat, "rig translation must be 3 numbers");
      c.translation = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
      c.validate();
      cams.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "malformed rig file '" + path + "': " + e.what());
  }
  return cams;
}

void save_rig(const std::string& path, const std::vector<CameraModel>& cameras) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cameras) {
    nlohmann::json e;
    std::vector<double> k, r;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        k.push_back(c.intrinsics(a, b));
        r.push_back(c.rotation(a, b));
      }
    }
    e["intrinsics"] = k;
    e["rotation"] = r;
    e["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
    j.push_back(e);
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write rig file '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace radargest::geom
