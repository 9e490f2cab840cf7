#pragma once

#include <string>
#include <vector>

#include "pointseg/types.hpp"

namespace pointseg {

// |a and b| / |a or b| over sorted index sets; throws when both are empty.
double instance_iou(const std::vector<int>& a, const std::vector<int>& b);

struct ScoredInstance {
  std::vector<int> points;  // sorted point indices
  double score = 0;
};

// Class-agnostic AP at one IoU threshold: predictions are walked in
// descending score (size breaks ties), each ground-truth instance matches at
// most once, and the all-point interpolated area under the precision-recall
// staircase is returned. Throws when there is no ground truth.
double average_precision(const std::vector<ScoredInstance>& preds,
                         const std::vector<std::vector<int>>& gts, double iou_thresh);

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct EvalResult {
  double map = 0;   // mean AP over IoU 0.50..0.95 step 0.05
  double ap50 = 0;
  double ap25 = 0;
  std::vector<double> thresholds;
  std::vector<double> ap_per_threshold;
  std::vector<std::vector<PrPoint>> pr_curves;  // one per threshold
  std::string table() const;
  std::string to_json_string() const;
};

// The ten mAP thresholds 0.50, 0.55, ..., 0.95 (exact decimals).
std::vector<double> map_thresholds();

std::vector<std::vector<int>> instances_from_labeling(const InstanceLabeling3D& labeling);

// scores has one entry per predicted instance label (1..num_instances).
EvalResult evaluate(const InstanceLabeling3D& pred, const std::vector<double>& scores,
                    const InstanceLabeling3D& gt);

}  // namespace pointseg
