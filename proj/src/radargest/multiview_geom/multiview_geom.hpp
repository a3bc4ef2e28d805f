#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace radargest::geom {

// Pinhole camera: x_cam = rotation * p + translation, pixel = K x_cam / z.
struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Matrix<double, 3, 4> projection() const;
  void validate() const;
};

struct Keypoint2D {
  double u = 0.0;
  double v = 0.0;
  double confidence = 1.0;
  int joint_id = 0;
};

inline constexpr int kJointsPerPerson = 17;
using PersonKeypoints = std::vector<Keypoint2D>;  // kJointsPerPerson entries, joint_id order

Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& p);

// Fundamental matrix with x_b^T F x_a = 0, scaled to unit Frobenius norm.
Eigen::Matrix3d fundamental_from_calib(const CameraModel& cam_a, const CameraModel& cam_b);

// One-sided distance (pixels) of x_b from the epipolar line F x_a.
double epipolar_line_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& x_a, const Eigen::Vector2d& x_b);

// Symmetric epipolar distance: mean of the point-to-line distances in both images.
double epipolar_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& x_a, const Eigen::Vector2d& x_b);

// Matches persons in every other view to the persons of view 0 using the
// mean epipolar distance over joints confident in both views. Greedy
// minimum-cost assignment; pairs with cost >= threshold stay unmatched.
struct PersonMatch {
  std::vector<int> person_in_view;  // index per view, -1 when unmatched; entry 0 is the reference person
  std::vector<double> cost;         // per view, 0 for view 0
};

std::vector<PersonMatch> match_across_views(const std::vector<std::vector<PersonKeypoints>>& detections,
                                            const std::vector<CameraModel>& cameras, double threshold_px);

// Same matcher with caller-supplied F matrices, fundamentals[v] relating view 0 to view v.
std::vector<PersonMatch> match_across_views(const std::vector<std::vector<PersonKeypoints>>& detections,
                                            const std::vector<Eigen::Matrix3d>& fundamentals, double threshold_px);

struct Observation {
  CameraModel camera;
  Eigen::Vector2d pixel;
};

// Linear DLT triangulation in normalised camera coordinates.
Eigen::Vector3d triangulate(const std::vector<Observation>& observations);

// Loads `rig.json`: a list of {intrinsics, rotation, translation}, matrices row-major.
std::vector<CameraModel> load_rig(const std::string& path);
void save_rig(const std::string& path, const std::vector<CameraModel>& cameras);

}  // namespace radargest::geom
