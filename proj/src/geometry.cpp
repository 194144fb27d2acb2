#include "balltrack/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "geometry_internal.hpp"

namespace balltrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

CameraModel::CameraModel(int id, const Mat34& P, int width, int height)
    : id_(id), P_(P), width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("camera " + std::to_string(id) +
                                ": image size must be positive");
  }
  if (!P.allFinite()) {
    throw std::invalid_argument("camera " + std::to_string(id) +
                                ": projection matrix is not finite");
  }
  const Eigen::Matrix3d M = P.leftCols<3>();
  const double det = M.determinant();
  const double scale = M.norm();
  if (scale == 0.0 || std::abs(det) <= 1e-12 * scale * scale * scale) {
    throw std::invalid_argument("camera " + std::to_string(id) +
                                ": leading 3x3 block of P is singular");
  }
  center_ = -M.inverse() * P.col(3);
  depth_sign_ = det > 0.0 ? 1.0 : -1.0;
}

Vec3 CameraModel::principal_axis() const {
  return (depth_sign_ * P_.block<1, 3>(2, 0).transpose()).normalized();
}

Projection try_project(const Point3& X, const CameraModel& cam,
                       const GeometryTolerances& tol) {
  const Mat34& P = cam.P();
  const Eigen::Vector3d w = P.leftCols<3>() * X + P.col(3);
  Projection out;
  out.depth = cam.depth_sign() * w.z();
  if (std::abs(w.z()) < tol.min_depth) {
    out.status = ProjectStatus::kDepthDegenerate;
    return out;
  }
  out.pixel = {w.x() / w.z(), w.y() / w.z()};
  if (out.depth < 0.0) out.status = ProjectStatus::kBehindCamera;
  return out;
}

Pixel project(const Point3& X, const CameraModel& cam,
              const GeometryTolerances& tol) {
  const Projection p = try_project(X, cam, tol);
  switch (p.status) {
    case ProjectStatus::kDepthDegenerate:
      throw ProjectionError(ProjectionError::Kind::kDepthDegenerate,
                            "point lies on the principal plane of camera " +
                                std::to_string(cam.id()));
    case ProjectStatus::kBehindCamera:
      throw ProjectionError(ProjectionError::Kind::kBehindCamera,
                            "point is behind camera " +
                                std::to_string(cam.id()));
    case ProjectStatus::kOk:
      break;
  }
  return p.pixel;
}

double reprojection_error(const Point3& X, const View& view,
                          const GeometryTolerances& tol) {
  const Projection p = try_project(X, *view.camera, tol);
  if (p.status != ProjectStatus::kOk) return kInf;
  return std::hypot(p.pixel.u - view.pixel.u, p.pixel.v - view.pixel.v);
}

std::vector<double> reprojection_errors(const Point3& X,
                                        std::span<const View> views,
                                        const GeometryTolerances& tol) {
  std::vector<double> out;
  out.reserve(views.size());
  for (const View& view : views) out.push_back(reprojection_error(X, view, tol));
  return out;
}

double squared_reprojection_cost(const Point3& X, std::span<const View> views,
                                 const GeometryTolerances& tol) {
  double cost = 0.0;
  for (const View& view : views) {
    const double e = reprojection_error(X, view, tol);
    cost += e * e;
  }
  return cost;
}

namespace detail {

bool centers_distinct(std::span<const View> views) {
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = i + 1; j < views.size(); ++j) {
      const Vec3 d = views[i].camera->center() - views[j].camera->center();
      if (d.squaredNorm() < 1e-18) return false;
    }
  }
  return true;
}

// Each camera contributes u*p3 - p1 and v*p3 - p2. Rows are scaled to unit
// norm, then the homogeneous coordinate is fixed to 1 and the remaining 3
// unknowns are solved in the least-squares sense via the normal equations.
NormalTerms normal_terms(const View& view) {
  NormalTerms terms;
  const Mat34& P = view.camera->P();
  const Eigen::Matrix<double, 1, 4> rows[2] = {
      view.pixel.u * P.row(2) - P.row(0),
      view.pixel.v * P.row(2) - P.row(1)};
  for (const auto& row : rows) {
    const double n = row.norm();
    if (n == 0.0) continue;
    const Eigen::Vector3d a = row.head<3>().transpose() / n;
    terms.normal.noalias() += a * a.transpose();
    terms.rhs -= a * (row(3) / n);
  }
  return terms;
}

std::optional<Point3> solve_normal_terms(const NormalTerms& terms,
                                         const GeometryTolerances& tol) {
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(terms.normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Eigen::Vector3d diag = ldlt.vectorD();
  if (diag.minCoeff() <= 1e-14 * diag.maxCoeff()) return std::nullopt;
  const Point3 X = ldlt.solve(terms.rhs);
  if (!X.allFinite()) return std::nullopt;
  // Homogeneous scale of the unit-norm solution (X, 1).
  const double w = 1.0 / std::sqrt(1.0 + X.squaredNorm());
  if (w < tol.min_homogeneous_scale) return std::nullopt;
  return X;
}

std::optional<Point3> linear_triangulation(std::span<const View> views,
                                           const GeometryTolerances& tol) {
  NormalTerms total;
  for (const View& view : views) {
    const NormalTerms terms = normal_terms(view);
    total.normal += terms.normal;
    total.rhs += terms.rhs;
  }
  return solve_normal_terms(total, tol);
}

Point3 gauss_newton_refine(const Point3& start, std::span<const View> views,
                           const GeometryTolerances& tol) {
  Point3 X = start;
  double cost = squared_reprojection_cost(X, views, tol);
  if (!std::isfinite(cost)) return X;

  for (int iter = 0; iter < tol.refine_max_iterations; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (const View& view : views) {
      const Mat34& P = view.camera->P();
      const Eigen::Vector3d w = P.leftCols<3>() * X + P.col(3);
      const double u = w.x() / w.z();
      const double v = w.y() / w.z();
      const Eigen::Vector3d ju =
          (P.block<1, 3>(0, 0) - u * P.block<1, 3>(2, 0)).transpose() / w.z();
      const Eigen::Vector3d jv =
          (P.block<1, 3>(1, 0) - v * P.block<1, 3>(2, 0)).transpose() / w.z();
      const double ru = u - view.pixel.u;
      const double rv = v - view.pixel.v;
      jtj.noalias() += ju * ju.transpose() + jv * jv.transpose();
      jtr += ju * ru + jv * rv;
    }
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(jtj);
    if (ldlt.info() != Eigen::Success) break;
    Eigen::Vector3d step = ldlt.solve(-jtr);
    if (!step.allFinite()) break;
    if (step.norm() < tol.refine_step) break;

    // Backtrack so the cost never increases.
    bool accepted = false;
    for (int halving = 0; halving < 16; ++halving) {
      const Point3 trial = X + step;
      const double trial_cost = squared_reprojection_cost(trial, views, tol);
      if (trial_cost <= cost) {
        X = trial;
        cost = trial_cost;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || step.norm() < tol.refine_step) break;
  }
  return X;
}

}  // namespace detail

Point3 triangulate(std::span<const View> views, bool refine,
                   const GeometryTolerances& tol) {
  if (views.size() < 2) {
    throw std::invalid_argument("triangulation needs at least 2 observations");
  }
  if (!detail::centers_distinct(views)) {
    throw DegenerateGeometry("camera centers coincide");
  }
  const auto linear = detail::linear_triangulation(views, tol);
  if (!linear) {
    throw DegenerateGeometry("rays are parallel or the point is at infinity");
  }
  if (!refine) return *linear;
  return detail::gauss_newton_refine(*linear, views, tol);
}

std::array<Point3, 8> Box::corners() const {
  std::array<Point3, 8> out;
  for (int i = 0; i < 8; ++i) {
    out[i] = Point3((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(),
                    (i & 4) ? max.z() : min.z());
  }
  return out;
}

bool Box::contains(const Point3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

Mat34 look_at_projection(const Point3& center, const Point3& target,
                         double focal_px, double cx, double cy) {
  const Vec3 forward = (target - center).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.squaredNorm() < 1e-24) right = Vec3::UnitX();
  right.normalize();
  const Vec3 down = forward.cross(right);

  Eigen::Matrix3d R;
  R.row(0) = right.transpose();
  R.row(1) = down.transpose();
  R.row(2) = forward.transpose();
  Eigen::Matrix3d K;
  K << focal_px, 0.0, cx, 0.0, focal_px, cy, 0.0, 0.0, 1.0;

  Mat34 Rt;
  Rt.leftCols<3>() = R;
  Rt.col(3) = -R * center;
  return K * Rt;
}

std::vector<CameraModel> synthetic_rig(int count, const Box& workspace,
                                       ImageSize image_size) {
  if (count < 2) throw std::invalid_argument("a rig needs at least 2 cameras");
  if (image_size.width <= 0 || image_size.height <= 0) {
    throw std::invalid_argument("image size must be positive");
  }
  const Point3 target = workspace.center();
  const double radius = 1.5 * workspace.extent().norm();
  const double height = workspace.max.z() + 2.0;

  std::vector<Point3> centers;
  centers.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / count;
    centers.emplace_back(target.x() + radius * std::cos(angle),
                         target.y() + radius * std::sin(angle), height);
  }

  // Focal length such that every workspace corner lands in the central 60%
  // of the image, for every camera.
  const double half_w = 0.5 * image_size.width;
  const double half_h = 0.5 * image_size.height;
  double focal = std::numeric_limits<double>::infinity();
  for (const Point3& c : centers) {
    const Mat34 unit = look_at_projection(c, target, 1.0, 0.0, 0.0);
    double max_x = 0.0;
    double max_y = 0.0;
    for (const Point3& corner : workspace.corners()) {
      const Eigen::Vector3d w = unit.leftCols<3>() * corner + unit.col(3);
      max_x = std::max(max_x, std::abs(w.x() / w.z()));
      max_y = std::max(max_y, std::abs(w.y() / w.z()));
    }
    if (max_x > 0.0) focal = std::min(focal, 0.6 * half_w / max_x);
    if (max_y > 0.0) focal = std::min(focal, 0.6 * half_h / max_y);
  }

  std::vector<CameraModel> rig;
  rig.reserve(count);
  for (int i = 0; i < count; ++i) {
    rig.emplace_back(i, look_at_projection(centers[i], target, focal, half_w, half_h),
                     image_size.width, image_size.height);
  }
  return rig;
}

}  // namespace balltrack
