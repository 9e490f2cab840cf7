#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pointseg/prompts.hpp"
#include "pointseg/types.hpp"

namespace pointseg {

// a.b / (|a||b|); throws on zero-norm input.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct MatchPair {
  int row = 0;
  int col = 0;
};

// Maximum-total-similarity one-to-one assignment over min(rows, cols) pairs.
// Among equally good assignments the lexicographically smallest one wins:
// row 0 takes the lowest column it can without hurting the total, then row 1,
// and so on. Result is sorted by row.
std::vector<MatchPair> bipartite_match(const Eigen::MatrixXd& similarity);

enum class MatchDirection { None, Forward, Reverse, Bidirectional };

const char* to_string(MatchDirection d);
MatchDirection match_direction_from_string(const std::string& s);

struct MatchingConfig {
  MatchDirection direction = MatchDirection::Bidirectional;
  double epsilon_margin = 0.02;  // box expansion, fraction of box diagonal
  double score_floor = 0.3;      // pairs scoring below this are dropped
  double min_box_size = 1e-3;    // rebuilt boxes never collapse below this
};

// A matched (3D point set, 3D box) prompt unit.
struct PromptPair {
  std::vector<int> points;  // sorted scene point indices, non-empty
  Box3D box;
  int pair_id = 0;
  double score = 0;  // mean matched cosine similarity, in [-1, 1]
};

// Reconciles the two prompt branches into point-box pairs.
//
// Bidirectional: groups are Hungarian-matched to boxes on descriptor cosine,
// the matched boxes are matched back against all groups, and only
// cycle-consistent pairs survive with their points filtered to the expanded
// box and the box refit around the kept points. Inconsistent or unmatched
// groups fall back to point-only pairs (group AABB box, floor score).
// Forward keeps the detector box and only filters points; Reverse trusts the
// reverse-matched group's points and keeps the detector box; None emits every
// group and every box as an independent pair.
std::vector<PromptPair> bidirectional_match(const PointBranchOutput& point_branch,
                                            const BoxBranchOutput& box_branch,
                                            const ScenePointCloud& cloud,
                                            const MatchingConfig& cfg);

}  // namespace pointseg
