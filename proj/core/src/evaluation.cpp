#include "pointseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

namespace pointseg {

double instance_iou(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) throw std::invalid_argument("iou of two empty sets");
  size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct RankedPred {
  const ScoredInstance* inst;
  size_t order;
};

std::vector<RankedPred> rank_predictions(const std::vector<ScoredInstance>& preds) {
  std::vector<RankedPred> ranked(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) ranked[i] = {&preds[i], i};
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedPred& a, const RankedPred& b) {
    if (a.inst->score != b.inst->score) return a.inst->score > b.inst->score;
    return a.inst->points.size() > b.inst->points.size();  // bigger instance first on ties
  });
  return ranked;
}

std::vector<char> greedy_tp_flags(const std::vector<RankedPred>& ranked,
                                  const std::vector<std::vector<int>>& gts, double iou_thresh) {
  std::vector<char> gt_used(gts.size(), 0);
  std::vector<char> tp(ranked.size(), 0);
  for (size_t k = 0; k < ranked.size(); ++k) {
    double best_iou = 0;
    int best_gt = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g]) continue;
      double iou = instance_iou(ranked[k].inst->points, gts[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_thresh) {
      gt_used[best_gt] = 1;
      tp[k] = 1;
    }
  }
  return tp;
}

}  // namespace

double average_precision(const std::vector<ScoredInstance>& preds,
                         const std::vector<std::vector<int>>& gts, double iou_thresh) {
  if (gts.empty()) throw std::invalid_argument("average precision: no ground truth instances");
  if (preds.empty()) return 0.0;

  auto ranked = rank_predictions(preds);
  auto tp = greedy_tp_flags(ranked, gts, iou_thresh);

  // precision at each rank, then highest precision at or right of each rank:
  // with recall steps of exactly 1/|GT| per true positive, the all-point
  // interpolated area is sum of interpolated precisions at TP ranks / |GT|.
  const size_t n = ranked.size();
  std::vector<double> precision(n);
  int tp_count = 0;
  for (size_t k = 0; k < n; ++k) {
    tp_count += tp[k];
    precision[k] = static_cast<double>(tp_count) / static_cast<double>(k + 1);
  }
  std::vector<double> interp(n);
  double running = 0;
  for (size_t k = n; k-- > 0;) {
    running = std::max(running, precision[k]);
    interp[k] = running;
  }
  double sum = 0;
  for (size_t k = 0; k < n; ++k)
    if (tp[k]) sum += interp[k];
  return sum / static_cast<double>(gts.size());
}

std::vector<double> map_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back(static_cast<double>(50 + 5 * k) / 100.0);
  return t;
}

std::vector<std::vector<int>> instances_from_labeling(const InstanceLabeling3D& labeling) {
  std::vector<std::vector<int>> sets(labeling.num_instances);
  for (size_t i = 0; i < labeling.labels.size(); ++i) {
    int32_t l = labeling.labels[i];
    if (l > 0) sets[l - 1].push_back(static_cast<int>(i));
  }
  return sets;
}

namespace {

std::vector<PrPoint> pr_curve(const std::vector<RankedPred>& ranked, const std::vector<char>& tp,
                              size_t gt_count) {
  std::vector<PrPoint> curve;
  int tps = 0;
  for (size_t k = 0; k < ranked.size(); ++k) {
    tps += tp[k];
    curve.push_back({static_cast<double>(tps) / static_cast<double>(gt_count),
                     static_cast<double>(tps) / static_cast<double>(k + 1)});
  }
  return curve;
}

}  // namespace

EvalResult evaluate(const InstanceLabeling3D& pred, const std::vector<double>& scores,
                    const InstanceLabeling3D& gt) {
  if (pred.labels.size() != gt.labels.size())
    throw std::invalid_argument("evaluate: labelings cover different point counts");
  if (static_cast<int32_t>(scores.size()) != pred.num_instances)
    throw std::invalid_argument("evaluate: one score per predicted instance required");
  if (gt.num_instances == 0)
    throw std::invalid_argument("evaluate: no ground truth instances");

  auto pred_sets = instances_from_labeling(pred);
  auto gt_sets = instances_from_labeling(gt);

  std::vector<ScoredInstance> preds;
  preds.reserve(pred_sets.size());
  for (size_t i = 0; i < pred_sets.size(); ++i) {
    if (pred_sets[i].empty()) continue;
    preds.push_back({std::move(pred_sets[i]), scores[i]});
  }

  EvalResult result;
  result.thresholds = map_thresholds();
  auto ranked = rank_predictions(preds);
  double sum = 0;
  for (double t : result.thresholds) {
    auto tp = greedy_tp_flags(ranked, gt_sets, t);
    double ap = preds.empty() ? 0.0 : [&] {
      std::vector<double> precision(ranked.size());
      int tps = 0;
      for (size_t k = 0; k < ranked.size(); ++k) {
        tps += tp[k];
        precision[k] = static_cast<double>(tps) / static_cast<double>(k + 1);
      }
      double running = 0, s = 0;
      std::vector<double> interp(ranked.size());
      for (size_t k = ranked.size(); k-- > 0;) {
        running = std::max(running, precision[k]);
        interp[k] = running;
      }
      for (size_t k = 0; k < ranked.size(); ++k)
        if (tp[k]) s += interp[k];
      return s / static_cast<double>(gt_sets.size());
    }();
    result.ap_per_threshold.push_back(ap);
    result.pr_curves.push_back(pr_curve(ranked, tp, gt_sets.size()));
    sum += ap;
  }
  result.map = sum / static_cast<double>(result.thresholds.size());
  result.ap50 = average_precision(preds, gt_sets, 0.50);
  result.ap25 = average_precision(preds, gt_sets, 0.25);
  return result;
}

std::string EvalResult::table() const {
  std::ostringstream os;
  os << "  mAP   AP50   AP25\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%5.3f  %5.3f  %5.3f\n", map, ap50, ap25);
  os << buf;
  return os.str();
}

std::string EvalResult::to_json_string() const {
  nlohmann::json doc;
  doc["mAP"] = map;
  doc["AP50"] = ap50;
  doc["AP25"] = ap25;
  doc["thresholds"] = thresholds;
  doc["ap_per_threshold"] = ap_per_threshold;
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& curve : pr_curves) {
    nlohmann::json jc = nlohmann::json::array();
    for (const auto& p : curve) jc.push_back({{"recall", p.recall}, {"precision", p.precision}});
    curves.push_back(std::move(jc));
  }
  doc["pr_curves"] = std::move(curves);
  return doc.dump(2);
}

}  // namespace pointseg
