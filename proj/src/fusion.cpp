#include "balltrack/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "geometry_internal.hpp"

namespace balltrack {

void FusionConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (min_inliers < 2) throw std::invalid_argument("min_inliers must be at least 2");
}

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::kTooFewObservations:
      return "too-few-observations";
    case FailureReason::kNoConsistentSet:
      return "no-consistent-set";
  }
  return "unknown";
}

namespace {

std::vector<View> sorted_by_camera(std::span<const View> views) {
  std::vector<View> sorted(views.begin(), views.end());
  std::sort(sorted.begin(), sorted.end(), [](const View& a, const View& b) {
    return a.camera->id() < b.camera->id();
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].camera->id() == sorted[i - 1].camera->id()) {
      throw std::invalid_argument("more than one observation for camera " +
                                  std::to_string(sorted[i].camera->id()));
    }
  }
  return sorted;
}

// Squared pixel distance, or -1 when the candidate cannot be seen by the
// camera (principal plane or behind it).
inline double squared_error(const Point3& X, const View& view, double min_depth) {
  const Mat34& P = view.camera->P();
  const double w3 = P(2, 0) * X.x() + P(2, 1) * X.y() + P(2, 2) * X.z() + P(2, 3);
  if (std::abs(w3) < min_depth || view.camera->depth_sign() * w3 < 0.0) return -1.0;
  const double w1 = P(0, 0) * X.x() + P(0, 1) * X.y() + P(0, 2) * X.z() + P(0, 3);
  const double w2 = P(1, 0) * X.x() + P(1, 1) * X.y() + P(1, 2) * X.z() + P(1, 3);
  const double du = w1 / w3 - view.pixel.u;
  const double dv = w2 / w3 - view.pixel.v;
  return du * du + dv * dv;
}

}  // namespace

ConsistentSet largest_consistent_subset(std::span<const View> views,
                                        const FusionConfig& cfg,
                                        FusionStats* stats) {
  cfg.validate();
  if (views.size() < 2) {
    throw std::invalid_argument("need at least 2 observations");
  }
  const std::vector<View> sorted = sorted_by_camera(views);
  const std::size_t n = sorted.size();
  const double eps2 = cfg.epsilon * cfg.epsilon;

  std::vector<detail::NormalTerms> terms;
  terms.reserve(n);
  for (const View& view : sorted) terms.push_back(detail::normal_terms(view));

  std::vector<char> member(n, 0);
  std::vector<char> best_member;
  std::size_t best_size = 0;
  double best_mean = 0.0;
  ConsistentSet best;

  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (stats) ++stats->candidates;
      const std::array<View, 2> pair = {sorted[i], sorted[j]};
      if (!detail::centers_distinct(pair)) continue;
      detail::NormalTerms sum_terms;
      sum_terms.normal = terms[i].normal + terms[j].normal;
      sum_terms.rhs = terms[i].rhs + terms[j].rhs;
      const auto candidate = detail::solve_normal_terms(sum_terms, cfg.tolerances);
      if (!candidate) continue;

      std::size_t size = 0;
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e2 = squared_error(*candidate, sorted[k], cfg.tolerances.min_depth);
        const bool inside = e2 >= 0.0 && e2 < eps2;
        member[k] = inside;
        if (inside) {
          ++size;
          sum += std::sqrt(e2);
        }
      }
      if (stats) stats->projections += static_cast<long long>(n);
      if (size == 0) continue;
      const double mean = sum / static_cast<double>(size);
      if (size > best_size || (size == best_size && mean < best_mean)) {
        best_size = size;
        best_mean = mean;
        best_member = member;
        best.candidate = *candidate;
        best.pair = {sorted[i].camera->id(), sorted[j].camera->id()};
      }
    }
  }

  if (best_size > 0) {
    best.mean_error = best_mean;
    for (std::size_t k = 0; k < n; ++k) {
      if (best_member[k]) best.inlier_ids.push_back(sorted[k].camera->id());
    }
  }
  return best;
}

FusionResult fuse(std::span<const View> views, const FusionConfig& cfg,
                  FusionStats* stats) {
  cfg.validate();
  if (views.size() < 2) return {FusionFailure{FailureReason::kTooFewObservations}};

  const ConsistentSet set = largest_consistent_subset(views, cfg, stats);
  if (static_cast<int>(set.inlier_ids.size()) < cfg.min_inliers) {
    return {FusionFailure{FailureReason::kNoConsistentSet}};
  }

  std::vector<View> inliers;
  inliers.reserve(set.inlier_ids.size());
  for (int id : set.inlier_ids) {
    const auto it = std::find_if(views.begin(), views.end(), [id](const View& v) {
      return v.camera->id() == id;
    });
    inliers.push_back(*it);
  }
  // Members came from one consistent candidate, so the linear stage cannot
  // degenerate in practice; fall back to the pair candidate if it does.
  Point3 position = set.candidate;
  if (const auto linear = detail::linear_triangulation(inliers, cfg.tolerances)) {
    position = *linear;
  }
  position = detail::gauss_newton_refine(position, inliers, cfg.tolerances);

  FusionSuccess success;
  success.position = position;
  success.inlier_ids = set.inlier_ids;
  success.residuals = reprojection_errors(position, inliers, cfg.tolerances);
  return {std::move(success)};
}

FusionResult fuse_all_kway(std::span<const View> views, const FusionConfig& cfg) {
  cfg.validate();
  const std::vector<View> sorted = sorted_by_camera(views);
  const Point3 position = triangulate(sorted, /*refine=*/true, cfg.tolerances);
  FusionSuccess success;
  success.position = position;
  for (const View& v : sorted) success.inlier_ids.push_back(v.camera->id());
  success.residuals = reprojection_errors(position, sorted, cfg.tolerances);
  return {std::move(success)};
}

}  // namespace balltrack
