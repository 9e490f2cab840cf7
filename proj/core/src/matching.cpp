#include "pointseg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace pointseg {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double na = a.norm(), nb = b.norm();
  if (na < 1e-15 || nb < 1e-15) throw std::invalid_argument("cosine: zero-norm input");
  return a.dot(b) / (na * nb);
}

namespace {

constexpr double kTieTol = 1e-9;

// Square min-cost assignment with potentials (Jonker-Volgenant style shortest
// augmenting paths, O(n^3)). Returns row -> col; duals via u/v.
struct AssignmentResult {
  std::vector<int> row_to_col;
  std::vector<double> u, v;  // potentials over rows/cols (1-indexed internally)
};

AssignmentResult solve_square_min(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  AssignmentResult res;
  res.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) res.row_to_col[p[j] - 1] = j - 1;
  res.u = std::move(u);
  res.v = std::move(v);
  return res;
}

// Padded square cost matrix: cost = maxSim - sim for real cells, 0-equivalent
// padding keeps the optimum over real cells unchanged.
std::vector<std::vector<double>> build_cost(const Eigen::MatrixXd& sim) {
  const int rows = static_cast<int>(sim.rows());
  const int cols = static_cast<int>(sim.cols());
  const int n = std::max(rows, cols);
  double mx = sim.maxCoeff();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, mx));  // pad cost == sim 0-level
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cost[i][j] = mx - sim(i, j);
  return cost;
}

// Sum of similarities in row order for the real pairs of an assignment;
// summation order is fixed so equal assignments produce identical totals.
double real_total(const Eigen::MatrixXd& sim, const std::vector<int>& row_to_col) {
  double total = 0;
  for (int i = 0; i < sim.rows(); ++i) {
    int j = row_to_col[i];
    if (j >= 0 && j < sim.cols()) total += sim(i, j);
  }
  return total;
}

// Best achievable total when rows [fixed_rows..) may use only the given free
// columns of the padded problem.
double best_suffix_total(const Eigen::MatrixXd& sim, int first_row,
                         const std::vector<int>& free_cols) {
  const int rows = static_cast<int>(sim.rows());
  const int cols = static_cast<int>(sim.cols());
  const int nrows = rows - first_row;
  const int n = std::max(nrows, static_cast<int>(free_cols.size()));
  if (n == 0) return 0;
  double mx = 0;
  for (int i = first_row; i < rows; ++i)
    for (int j : free_cols)
      if (j < cols) mx = std::max(mx, sim(i, j));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, mx));
  for (int i = 0; i < nrows; ++i)
    for (size_t jj = 0; jj < free_cols.size(); ++jj)
      if (free_cols[jj] < cols) cost[i][jj] = mx - sim(first_row + i, free_cols[jj]);
  auto res = solve_square_min(cost);
  double total = 0;
  for (int i = 0; i < nrows; ++i) {
    int jj = res.row_to_col[i];
    if (jj >= 0 && jj < static_cast<int>(free_cols.size()) && free_cols[jj] < cols)
      total += sim(first_row + i, free_cols[jj]);
  }
  return total;
}

}  // namespace

std::vector<MatchPair> bipartite_match(const Eigen::MatrixXd& sim) {
  if (sim.rows() == 0 || sim.cols() == 0)
    throw std::invalid_argument("bipartite_match: empty similarity matrix");
  if (!sim.allFinite()) throw std::invalid_argument("bipartite_match: non-finite entries");

  const int rows = static_cast<int>(sim.rows());
  const int cols = static_cast<int>(sim.cols());
  auto cost = build_cost(sim);
  auto base = solve_square_min(cost);
  const double best = real_total(sim, base.row_to_col);

  // Lexicographic refinement. Complementary slackness limits the candidate
  // columns of each row to its tight edges, so rows whose only tight edge is
  // their assigned column are settled without extra solves.
  std::vector<int> chosen(rows, -1);
  std::vector<char> used(cols, false);
  double prefix = 0;
  for (int i = 0; i < rows; ++i) {
    std::vector<int> candidates;
    for (int j = 0; j < cols; ++j) {
      if (used[j]) continue;
      double reduced = cost[i][j] - base.u[i + 1] - base.v[j + 1];
      if (reduced <= kTieTol) candidates.push_back(j);
    }
    int assigned = base.row_to_col[i] < cols ? base.row_to_col[i] : -1;
    int pick = -1;
    if (candidates.size() == 1 && assigned == candidates[0]) {
      pick = assigned;
    } else {
      for (int j : candidates) {
        used[j] = true;
        std::vector<int> free_cols;
        for (int c = 0; c < cols; ++c)
          if (!used[c]) free_cols.push_back(c);
        double total = prefix + sim(i, j) + best_suffix_total(sim, i + 1, free_cols);
        used[j] = false;
        if (total >= best - kTieTol) {
          pick = j;
          break;
        }
      }
      // no verifiable column means the row sits on padding (more rows than
      // columns); matching earlier rows is preferred, so padding comes last
    }
    if (pick >= 0) {
      chosen[i] = pick;
      used[pick] = true;
      prefix += sim(i, pick);
    }
  }

  std::vector<MatchPair> out;
  for (int i = 0; i < rows; ++i)
    if (chosen[i] >= 0) out.push_back({i, chosen[i]});
  return out;
}

const char* to_string(MatchDirection d) {
  switch (d) {
    case MatchDirection::None: return "none";
    case MatchDirection::Forward: return "forward";
    case MatchDirection::Reverse: return "reverse";
    case MatchDirection::Bidirectional: return "bidirectional";
  }
  return "?";
}

MatchDirection match_direction_from_string(const std::string& s) {
  if (s == "none") return MatchDirection::None;
  if (s == "forward") return MatchDirection::Forward;
  if (s == "reverse") return MatchDirection::Reverse;
  if (s == "bidirectional") return MatchDirection::Bidirectional;
  throw ConfigError("unknown matching direction '" + s + "'");
}

namespace {

std::vector<int> points_in_box(const std::vector<int>& group, const ScenePointCloud& cloud,
                               const Box3D& box, double margin) {
  std::vector<int> kept;
  kept.reserve(group.size());
  for (int idx : group)
    if (box.contains(cloud.positions[idx], margin)) kept.push_back(idx);
  return kept;
}

PromptPair fallback_pair(const std::vector<int>& group, const ScenePointCloud& cloud,
                         const MatchingConfig& cfg) {
  PromptPair pair;
  pair.points = group;
  std::sort(pair.points.begin(), pair.points.end());
  pair.box = Box3D::bounding(cloud.positions, pair.points, cfg.min_box_size);
  pair.score = cfg.score_floor;
  return pair;
}

Box3D refit_box(const std::vector<int>& points, const ScenePointCloud& cloud,
                const MatchingConfig& cfg) {
  Box3D aabb = Box3D::bounding(cloud.positions, points, cfg.min_box_size);
  return aabb.expanded(cfg.epsilon_margin * aabb.diagonal());
}

}  // namespace

std::vector<PromptPair> bidirectional_match(const PointBranchOutput& pb,
                                            const BoxBranchOutput& bb,
                                            const ScenePointCloud& cloud,
                                            const MatchingConfig& cfg) {
  const int G = static_cast<int>(pb.point_groups.size());
  const int B = static_cast<int>(bb.boxes.size());
  std::vector<PromptPair> out;

  auto emit = [&](PromptPair&& pair) {
    if (pair.points.empty()) return;
    pair.pair_id = static_cast<int>(out.size());
    out.push_back(std::move(pair));
  };

  if (cfg.direction == MatchDirection::None) {
    // both branches prompt independently; no reconciliation
    for (int g = 0; g < G; ++g) emit(fallback_pair(pb.point_groups[g], cloud, cfg));
    for (int b = 0; b < B; ++b) {
      PromptPair pair;
      for (size_t i = 0; i < cloud.size(); ++i)
        if (bb.boxes[b].contains(cloud.positions[i])) pair.points.push_back(static_cast<int>(i));
      pair.box = bb.boxes[b];
      pair.score = cfg.score_floor;
      emit(std::move(pair));
    }
    return out;
  }

  if (G == 0) return out;
  if (B == 0) {
    for (int g = 0; g < G; ++g) emit(fallback_pair(pb.point_groups[g], cloud, cfg));
    return out;
  }

  Eigen::MatrixXd sim(G, B);
  for (int g = 0; g < G; ++g)
    for (int b = 0; b < B; ++b) sim(g, b) = cosine_similarity(pb.features[g], bb.features[b]);

  auto forward = bipartite_match(sim);
  std::vector<char> group_handled(G, false);

  if (cfg.direction == MatchDirection::Forward) {
    for (const auto& m : forward) {
      group_handled[m.row] = true;
      const Box3D& box = bb.boxes[m.col];
      double score = sim(m.row, m.col);
      if (score < cfg.score_floor) continue;  // matching outlier, dropped
      PromptPair pair;
      pair.points = points_in_box(pb.point_groups[m.row], cloud, box,
                                  cfg.epsilon_margin * box.diagonal());
      std::sort(pair.points.begin(), pair.points.end());
      pair.box = box;
      pair.score = score;
      emit(std::move(pair));
    }
  } else {
    // reverse pass: matched boxes against all group descriptors
    Eigen::MatrixXd rev(forward.size(), G);
    for (size_t bi = 0; bi < forward.size(); ++bi)
      for (int g = 0; g < G; ++g) rev(static_cast<int>(bi), g) = sim(g, forward[bi].col);
    auto reverse = bipartite_match(rev);
    std::vector<int> reverse_group(forward.size(), -1);
    for (const auto& m : reverse) reverse_group[m.row] = m.col;

    if (cfg.direction == MatchDirection::Reverse) {
      for (size_t bi = 0; bi < forward.size(); ++bi) {
        int g = reverse_group[bi];
        if (g < 0) continue;
        group_handled[g] = true;
        double score = sim(g, forward[bi].col);
        if (score < cfg.score_floor) continue;
        PromptPair pair;
        pair.points = pb.point_groups[g];
        std::sort(pair.points.begin(), pair.points.end());
        pair.box = bb.boxes[forward[bi].col];
        pair.score = score;
        emit(std::move(pair));
      }
    } else {  // bidirectional
      for (size_t bi = 0; bi < forward.size(); ++bi) {
        int g_fwd = forward[bi].row;
        int box_idx = forward[bi].col;
        int g_rev = reverse_group[bi];
        group_handled[g_fwd] = true;
        if (g_rev != g_fwd) {
          // cycle-inconsistent match is an outlier; keep the group as a
          // point-only prompt rather than losing the instance
          emit(fallback_pair(pb.point_groups[g_fwd], cloud, cfg));
          continue;
        }
        const Box3D& box = bb.boxes[box_idx];
        double score = 0.5 * (sim(g_fwd, box_idx) + sim(g_rev, box_idx));
        std::vector<int> kept = points_in_box(pb.point_groups[g_fwd], cloud, box,
                                              cfg.epsilon_margin * box.diagonal());
        if (kept.empty()) {
          emit(fallback_pair(pb.point_groups[g_fwd], cloud, cfg));
          continue;
        }
        if (score < cfg.score_floor) continue;
        std::sort(kept.begin(), kept.end());
        PromptPair pair;
        pair.box = refit_box(kept, cloud, cfg);
        pair.points = std::move(kept);
        pair.score = score;
        emit(std::move(pair));
      }
    }
  }

  // groups left unmatched (more groups than boxes) keep their points
  for (int g = 0; g < G; ++g)
    if (!group_handled[g]) emit(fallback_pair(pb.point_groups[g], cloud, cfg));
  return out;
}

}  // namespace pointseg
