#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace balltrack {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

struct Pixel {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Numeric tolerances used by projection and triangulation.
struct GeometryTolerances {
  double min_depth = 1e-9;            // |w3| below this is on the principal plane
  double min_homogeneous_scale = 1e-12;
  double refine_step = 1e-10;         // Gauss-Newton stops when |dX| < this (m)
  int refine_max_iterations = 10;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProjectionError : public GeometryError {
 public:
  enum class Kind { kDepthDegenerate, kBehindCamera };
  ProjectionError(Kind kind, const std::string& what)
      : GeometryError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class DegenerateGeometry : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// A calibrated pinhole camera. P maps homogeneous world meters to
/// homogeneous pixels. The camera center and the depth sign convention are
/// derived once at construction.
class CameraModel {
 public:
  CameraModel(int id, const Mat34& P, int width, int height);

  int id() const { return id_; }
  const Mat34& P() const { return P_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Point3& center() const { return center_; }
  /// Unit vector along the principal axis, pointing towards visible points.
  Vec3 principal_axis() const;
  /// +1 or -1 such that depth = depth_sign * w3 is positive in front.
  double depth_sign() const { return depth_sign_; }

 private:
  int id_;
  Mat34 P_;
  int width_;
  int height_;
  Point3 center_;
  double depth_sign_;
};

struct PixelObservation {
  int camera_id = 0;
  Pixel pixel;
  long long frame = 0;
};

/// An observation paired with the camera that produced it.
struct View {
  Pixel pixel;
  const CameraModel* camera = nullptr;
};

enum class ProjectStatus { kOk, kDepthDegenerate, kBehindCamera };

struct Projection {
  Pixel pixel;
  double depth = 0.0;  // sign-corrected w3
  ProjectStatus status = ProjectStatus::kOk;
};

/// Non-throwing projection; status reports the degenerate cases.
Projection try_project(const Point3& X, const CameraModel& cam,
                       const GeometryTolerances& tol = {});

/// Throws ProjectionError for a point on the principal plane or behind the
/// camera.
Pixel project(const Point3& X, const CameraModel& cam,
              const GeometryTolerances& tol = {});

/// Linear (DLT) triangulation, optionally followed by Gauss-Newton on the
/// summed squared reprojection error. Requires >= 2 views.
Point3 triangulate(std::span<const View> views, bool refine,
                   const GeometryTolerances& tol = {});

/// Sum of squared pixel reprojection errors; +inf if any view is degenerate.
double squared_reprojection_cost(const Point3& X, std::span<const View> views,
                                 const GeometryTolerances& tol = {});

/// Per-view Euclidean pixel distance. Views where the point cannot be
/// projected (principal plane or behind the camera) report +inf.
std::vector<double> reprojection_errors(const Point3& X,
                                        std::span<const View> views,
                                        const GeometryTolerances& tol = {});

/// Single-view reprojection distance with the same conventions.
double reprojection_error(const Point3& X, const View& view,
                          const GeometryTolerances& tol = {});

struct Box {
  Point3 min;
  Point3 max;

  Point3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  std::array<Point3, 8> corners() const;
  bool contains(const Point3& p) const;
};

struct ImageSize {
  int width = 640;
  int height = 480;
};

/// c cameras on a horizontal circle above the workspace, all aimed at its
/// center and sharing one intrinsic matrix.
std::vector<CameraModel> synthetic_rig(int count, const Box& workspace,
                                       ImageSize image_size = {});

/// Builds K [R | -R C] for a camera at `center` looking at `target`, with
/// world +z as up.
Mat34 look_at_projection(const Point3& center, const Point3& target,
                         double focal_px, double cx, double cy);

}  // namespace balltrack
