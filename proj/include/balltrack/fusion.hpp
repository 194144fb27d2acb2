#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "balltrack/geometry.hpp"

namespace balltrack {

struct FusionConfig {
  double epsilon = 5.0;  // px
  int min_inliers = 2;
  GeometryTolerances tolerances;

  void validate() const;
};

/// Operation counts for one pass of the pair search.
struct FusionStats {
  long long candidates = 0;   // pair triangulations attempted
  long long projections = 0;  // candidate-vs-observation scorings
};

struct ConsistentSet {
  std::vector<int> inlier_ids;  // ascending camera ids
  Point3 candidate = Point3::Zero();
  double mean_error = 0.0;
  std::pair<int, int> pair{-1, -1};  // camera ids of the generating pair

  bool empty() const { return inlier_ids.empty(); }
};

/// Tries every camera pair, triangulates a candidate from the pair alone and
/// keeps the candidate explaining the most observations within epsilon.
/// Ties go to the smaller mean reprojection error over the set, then to the
/// lexicographically smaller pair of camera ids. Throws std::invalid_argument
/// on fewer than 2 observations or repeated camera ids.
ConsistentSet largest_consistent_subset(std::span<const View> views,
                                        const FusionConfig& cfg,
                                        FusionStats* stats = nullptr);

enum class FailureReason { kTooFewObservations, kNoConsistentSet };

std::string_view to_string(FailureReason reason);

struct FusionSuccess {
  Point3 position;
  std::vector<int> inlier_ids;
  std::vector<double> residuals;  // px, aligned with inlier_ids
};

struct FusionFailure {
  FailureReason reason;
};

struct FusionResult {
  std::variant<FusionSuccess, FusionFailure> outcome;

  bool ok() const { return std::holds_alternative<FusionSuccess>(outcome); }
  const FusionSuccess& success() const { return std::get<FusionSuccess>(outcome); }
  const FusionFailure& failure() const { return std::get<FusionFailure>(outcome); }
};

/// Robust 3D estimate: largest consistent subset, then a refined
/// triangulation over its members.
FusionResult fuse(std::span<const View> views, const FusionConfig& cfg,
                  FusionStats* stats = nullptr);

/// Baseline that triangulates every observation with no outlier rejection.
FusionResult fuse_all_kway(std::span<const View> views, const FusionConfig& cfg);

}  // namespace balltrack
