#pragma once

#include <optional>
#include <tuple>
#include <vector>

#include "pointseg/matching.hpp"
#include "pointseg/types.hpp"

namespace pointseg {

// L1-normalized histogram of the nonzero mask labels in a patch around a
// point's projection. Invalid when the patch holds only background.
struct LabelDistribution {
  std::vector<std::pair<int32_t, double>> probs;  // sorted by label
  int point_id = 0;
  int frame_id = 0;
  bool valid = false;
};

// Throws when the point is not visible in the frame (projection outside or
// depth disagreement); returns an invalid distribution for all-background
// patches. patch must be odd.
LabelDistribution label_distribution(int point_idx, const Eigen::Vector3d& position,
                                     const PosedFrame& frame, const Mask2D& mask, int patch,
                                     double depth_tol);

// Histogram-only variant used once the projection is already known.
LabelDistribution label_distribution_at(double u, double v, const Mask2D& mask, int patch);

// Cosine of two same-frame label distributions; in [0,1].
double frame_affinity(const LabelDistribution& a, const LabelDistribution& b);

// Sparse symmetric pairwise affinity over prompt points. Pairs without any
// co-visible evidence have no entry at all.
struct AffinityEntry {
  int neighbor = 0;
  double value = 0;
  int evidence = 0;
};

struct AffinityMatrix {
  int n = 0;
  std::vector<std::vector<AffinityEntry>> rows;  // symmetric, sorted by neighbor

  std::optional<AffinityEntry> at(int i, int j) const;
};

// Per-frame sparse scores (i, j, affinity); presence of a tuple means the
// pair was co-visible with valid label evidence in that frame.
using FramePairScores = std::vector<std::tuple<int, int, double>>;

// Visibility-weighted mean per pair across frames; evidence counts recorded.
AffinityMatrix aggregate_affinity(int n, const std::vector<FramePairScores>& per_frame);

// Evidence-weighted mean affinity between a region and a candidate point,
// over region members that have an entry toward j. nullopt = no evidence.
std::optional<double> region_point_score(const std::vector<int>& region, int j,
                                         const AffinityMatrix& affinity);

// Deterministic region growing: points are scanned in index order, an
// unlabeled point seeds a region, and neighbors join while their
// region-point score exceeds tau. Every point ends up labeled.
std::vector<int32_t> affinity_merge(const AffinityMatrix& affinity,
                                    const std::vector<std::vector<int>>& neighbors, double tau);

// Simplified merging without affinity scores: neighbors are unioned when the
// single most frequent mask label around them agrees in more than half of
// their co-visible frames. Used as the merge stage when affinity-aware
// merging is disabled.
std::vector<int32_t> dominant_label_merge(
    int n, const std::vector<std::vector<LabelDistribution>>& per_frame_dists,
    const std::vector<std::vector<int>>& neighbors);

// Symmetrized k-nearest-neighbor adjacency with deterministic ordering.
std::vector<std::vector<int>> knn_adjacency(const std::vector<Eigen::Vector3d>& points, int k);

struct PropagationResult {
  InstanceLabeling3D labeling;
  std::vector<int32_t> pair_region;  // per pair: compacted region label
  std::vector<double> region_scores; // per region (index = label-1): best pair score
  std::vector<int> region_sizes;     // claimed point count per region
};

// Lifts merge labels over prompt points to the whole cloud: every scene point
// inside a pair's point set takes that pair's region label (majority label of
// the pair's members); points claimed by several regions go to the one whose
// pair medoid is nearest; everything else stays 0.
PropagationResult propagate_labels(const std::vector<int32_t>& prompt_labels,
                                   const std::vector<int>& prompt_scene_indices,
                                   const std::vector<PromptPair>& pairs,
                                   const ScenePointCloud& cloud);

}  // namespace pointseg
