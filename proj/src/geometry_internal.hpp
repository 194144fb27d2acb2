#pragma once

#include <optional>
#include <span>

#include "balltrack/geometry.hpp"

namespace balltrack::detail {

bool centers_distinct(std::span<const View> views);

/// One view's contribution to the linear normal equations, A^T A and -A^T b
/// over its two unit-norm DLT rows. Contributions of several views add.
struct NormalTerms {
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
};

NormalTerms normal_terms(const View& view);

/// Solves accumulated normal equations; nullopt on degenerate geometry.
std::optional<Point3> solve_normal_terms(const NormalTerms& terms,
                                         const GeometryTolerances& tol);

/// Linear stage only; nullopt on degenerate geometry.
std::optional<Point3> linear_triangulation(std::span<const View> views,
                                           const GeometryTolerances& tol);

Point3 gauss_newton_refine(const Point3& start, std::span<const View> views,
                           const GeometryTolerances& tol);

}  // namespace balltrack::detail
