#include "pointseg/merging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <unordered_map>

#include "pointseg/projection.hpp"
#include "pointseg/refinement.hpp"

namespace pointseg {

LabelDistribution label_distribution_at(double u, double v, const Mask2D& mask, int patch) {
  if (patch < 1 || patch % 2 == 0)
    throw ConfigError("label distribution: patch must be a positive odd number");
  const int r = patch / 2;
  const int col = static_cast<int>(std::lround(u));
  const int row = static_cast<int>(std::lround(v));

  std::map<int32_t, int> counts;
  int total = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      int rr = row + dy, cc = col + dx;
      if (!mask.labels.in_bounds(rr, cc)) continue;
      int32_t label = mask.labels(rr, cc);
      if (label == 0) continue;  // background carries no evidence
      ++counts[label];
      ++total;
    }
  }

  LabelDistribution dist;
  dist.frame_id = mask.frame_id;
  if (total == 0) return dist;  // invalid
  dist.valid = true;
  dist.probs.reserve(counts.size());
  for (const auto& [label, count] : counts)
    dist.probs.emplace_back(label, static_cast<double>(count) / total);
  return dist;
}

LabelDistribution label_distribution(int point_idx, const Eigen::Vector3d& position,
                                     const PosedFrame& frame, const Mask2D& mask, int patch,
                                     double depth_tol) {
  if (!is_visible(position, frame, depth_tol))
    throw std::invalid_argument("label distribution: point not visible in frame");
  ProjectedPoint proj = project_point(position, frame);
  LabelDistribution dist = label_distribution_at(proj.u, proj.v, mask, patch);
  dist.point_id = point_idx;
  return dist;
}

double frame_affinity(const LabelDistribution& a, const LabelDistribution& b) {
  if (!a.valid || !b.valid)
    throw std::invalid_argument("frame affinity: invalid label distribution");
  if (a.frame_id != b.frame_id)
    throw std::invalid_argument("frame affinity: distributions from different frames");
  double dot = 0;
  size_t i = 0, j = 0;
  while (i < a.probs.size() && j < b.probs.size()) {
    if (a.probs[i].first == b.probs[j].first) {
      dot += a.probs[i].second * b.probs[j].second;
      ++i;
      ++j;
    } else if (a.probs[i].first < b.probs[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  auto norm = [](const LabelDistribution& d) {
    double s = 0;
    for (const auto& [label, p] : d.probs) s += p * p;
    return std::sqrt(s);
  };
  return dot / (norm(a) * norm(b));
}

std::optional<AffinityEntry> AffinityMatrix::at(int i, int j) const {
  if (i < 0 || i >= n || j < 0 || j >= n) return std::nullopt;
  if (i == j) return AffinityEntry{i, 1.0, 1};
  const auto& row = rows[i];
  auto it = std::lower_bound(row.begin(), row.end(), j,
                             [](const AffinityEntry& e, int v) { return e.neighbor < v; });
  if (it == row.end() || it->neighbor != j) return std::nullopt;
  return *it;
}

AffinityMatrix aggregate_affinity(int n, const std::vector<FramePairScores>& per_frame) {
  struct Acc {
    double sum = 0;
    int count = 0;
  };
  std::unordered_map<uint64_t, Acc> acc;
  auto key = [n](int i, int j) {
    if (i > j) std::swap(i, j);
    return static_cast<uint64_t>(i) * static_cast<uint64_t>(n) + static_cast<uint64_t>(j);
  };
  // frames accumulate in list order so the reduction is deterministic
  for (const auto& frame : per_frame) {
    for (const auto& [i, j, score] : frame) {
      if (i == j) continue;
      auto& a = acc[key(i, j)];
      a.sum += score;
      a.count += 1;
    }
  }

  AffinityMatrix m;
  m.n = n;
  m.rows.resize(n);
  for (const auto& [k, a] : acc) {
    int i = static_cast<int>(k / n), j = static_cast<int>(k % n);
    double value = a.sum / a.count;
    m.rows[i].push_back({j, value, a.count});
    m.rows[j].push_back({i, value, a.count});
  }
  for (auto& row : m.rows)
    std::sort(row.begin(), row.end(),
              [](const AffinityEntry& a, const AffinityEntry& b) { return a.neighbor < b.neighbor; });
  return m;
}

std::optional<double> region_point_score(const std::vector<int>& region, int j,
                                         const AffinityMatrix& affinity) {
  if (region.empty()) throw std::invalid_argument("region-point score: empty region");
  double weighted = 0;
  double weight = 0;
  for (int k : region) {
    auto entry = affinity.at(k, j);
    if (!entry || k == j) continue;
    weighted += entry->value * entry->evidence;
    weight += entry->evidence;
  }
  if (weight <= 0) return std::nullopt;
  return weighted / weight;
}

std::vector<int32_t> affinity_merge(const AffinityMatrix& affinity,
                                    const std::vector<std::vector<int>>& neighbors, double tau) {
  if (tau <= 0 || tau >= 1) throw ConfigError("affinity merge: tau must be in (0,1)");
  const int n = affinity.n;
  if (static_cast<int>(neighbors.size()) != n)
    throw ConfigError("affinity merge: adjacency size mismatch");

  std::vector<int32_t> labels(n, 0);
  // running region->candidate evidence sums, so each admission test is O(1)
  std::vector<double> acc(n, 0), den(n, 0);
  std::vector<int> touched;

  int32_t id = 0;
  for (int seed = 0; seed < n; ++seed) {
    if (labels[seed] != 0) continue;
    ++id;

    touched.clear();
    auto absorb = [&](int member) {
      labels[member] = id;
      for (const auto& e : affinity.rows[member]) {
        if (den[e.neighbor] == 0 && acc[e.neighbor] == 0) touched.push_back(e.neighbor);
        acc[e.neighbor] += e.value * e.evidence;
        den[e.neighbor] += e.evidence;
      }
    };

    std::deque<int> queue;
    absorb(seed);
    queue.push_back(seed);
    while (!queue.empty()) {
      int current = queue.front();
      queue.pop_front();
      for (int j : neighbors[current]) {
        if (labels[j] != 0) continue;
        if (den[j] <= 0) continue;  // no evidence toward the region yet
        if (acc[j] / den[j] > tau) {
          absorb(j);
          queue.push_back(j);
        }
      }
    }
    for (int t : touched) {
      acc[t] = 0;
      den[t] = 0;
    }
  }
  return labels;
}

std::vector<int32_t> dominant_label_merge(
    int n, const std::vector<std::vector<LabelDistribution>>& per_frame_dists,
    const std::vector<std::vector<int>>& neighbors) {
  // dominant label per point per frame (0 = no evidence)
  std::vector<std::vector<int32_t>> dominant(per_frame_dists.size(),
                                             std::vector<int32_t>(n, 0));
  for (size_t f = 0; f < per_frame_dists.size(); ++f) {
    for (const auto& dist : per_frame_dists[f]) {
      if (!dist.valid) continue;
      int32_t best_label = 0;
      double best_p = -1;
      for (const auto& [label, p] : dist.probs) {
        if (p > best_p) {
          best_p = p;
          best_label = label;
        }
      }
      dominant[f][dist.point_id] = best_label;
    }
  }

  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  for (int i = 0; i < n; ++i) {
    for (int j : neighbors[i]) {
      if (j <= i) continue;
      int covis = 0, agree = 0;
      for (size_t f = 0; f < dominant.size(); ++f) {
        int32_t a = dominant[f][i], b = dominant[f][j];
        if (a == 0 || b == 0) continue;
        ++covis;
        agree += a == b;
      }
      if (covis >= 1 && 2 * agree > covis) parent[find(i)] = find(j);
    }
  }

  std::vector<int32_t> raw(n);
  for (int i = 0; i < n; ++i) raw[i] = find(i) + 1;
  return compact_labels(raw).labels;
}

std::vector<std::vector<int>> knn_adjacency(const std::vector<Eigen::Vector3d>& points, int k) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<int>> adj(n);
  if (n <= 1 || k < 1) return adj;

  Eigen::Vector3d lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-9);
  // cell size aimed at a handful of points per cell
  double cell = std::max(1e-9, std::cbrt(extent.prod() / std::max(1, n)) * 1.5);
  auto cell_of = [&](const Eigen::Vector3d& p) {
    return std::array<int, 3>{static_cast<int>((p.x() - lo.x()) / cell),
                              static_cast<int>((p.y() - lo.y()) / cell),
                              static_cast<int>((p.z() - lo.z()) / cell)};
  };
  std::unordered_map<uint64_t, std::vector<int>> grid;
  auto cell_key = [](const std::array<int, 3>& c) {
    uint64_t h = 1469598103934665603ULL;
    for (int v : c) {
      h ^= static_cast<uint64_t>(static_cast<uint32_t>(v));
      h *= 1099511628211ULL;
    }
    return h;
  };
  for (int i = 0; i < n; ++i) grid[cell_key(cell_of(points[i]))].push_back(i);

  std::vector<std::pair<double, int>> cand;
  for (int i = 0; i < n; ++i) {
    auto c = cell_of(points[i]);
    cand.clear();
    for (int ring = 1; ring <= 64; ++ring) {
      cand.clear();
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            auto it = grid.find(cell_key({c[0] + dx, c[1] + dy, c[2] + dz}));
            if (it == grid.end()) continue;
            for (int j : it->second) {
              if (j == i) continue;
              cand.emplace_back((points[j] - points[i]).squaredNorm(), j);
            }
          }
        }
      }
      // the ring is sufficient once k candidates fit inside its inradius
      double safe = static_cast<double>(ring) * cell;
      if (static_cast<int>(cand.size()) >= k) {
        std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
        if (cand[k - 1].first <= safe * safe || ring == 64) break;
      }
      if (ring == 64) break;
    }
    int take = std::min<int>(k, static_cast<int>(cand.size()));
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    for (int t = 0; t < take; ++t) adj[i].push_back(cand[t].second);
  }

  // symmetrize and order deterministically
  for (int i = 0; i < n; ++i)
    for (int j : adj[i])
      if (std::find(adj[j].begin(), adj[j].end(), i) == adj[j].end()) adj[j].push_back(i);
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

PropagationResult propagate_labels(const std::vector<int32_t>& prompt_labels,
                                   const std::vector<int>& prompt_scene_indices,
                                   const std::vector<PromptPair>& pairs,
                                   const ScenePointCloud& cloud) {
  if (prompt_labels.size() != prompt_scene_indices.size())
    throw std::invalid_argument("propagate: prompt labels/index size mismatch");

  std::unordered_map<int, int> to_prompt;
  to_prompt.reserve(prompt_scene_indices.size());
  for (size_t i = 0; i < prompt_scene_indices.size(); ++i)
    to_prompt[prompt_scene_indices[i]] = static_cast<int>(i);

  // pair region = majority merge label among the pair's members
  std::vector<int32_t> pair_region_raw(pairs.size(), 0);
  std::vector<Eigen::Vector3d> pair_medoids(pairs.size(), Eigen::Vector3d::Zero());
  for (size_t pi = 0; pi < pairs.size(); ++pi) {
    std::map<int32_t, int> votes;
    for (int scene_idx : pairs[pi].points) {
      auto it = to_prompt.find(scene_idx);
      if (it == to_prompt.end()) continue;
      int32_t l = prompt_labels[it->second];
      if (l != 0) ++votes[l];
    }
    int best_count = 0;
    int32_t best_label = 0;
    for (const auto& [label, count] : votes) {
      if (count > best_count) {  // ties resolve to the smaller label
        best_count = count;
        best_label = label;
      }
    }
    pair_region_raw[pi] = best_label;

    std::vector<Eigen::Vector3d> member_pos;
    member_pos.reserve(pairs[pi].points.size());
    for (int idx : pairs[pi].points) member_pos.push_back(cloud.positions[idx]);
    if (!member_pos.empty()) pair_medoids[pi] = member_pos[medoid_index3d(member_pos)];
  }

  // claim scene points; medoid distance settles multi-claims
  std::vector<int32_t> raw(cloud.size(), 0);
  std::vector<double> claim_dist(cloud.size(), std::numeric_limits<double>::infinity());
  for (size_t pi = 0; pi < pairs.size(); ++pi) {
    if (pair_region_raw[pi] == 0) continue;
    for (int idx : pairs[pi].points) {
      double d = (cloud.positions[idx] - pair_medoids[pi]).norm();
      int32_t current = raw[idx];
      if (current == 0 || d < claim_dist[idx] ||
          (d == claim_dist[idx] && pair_region_raw[pi] < current)) {
        raw[idx] = pair_region_raw[pi];
        claim_dist[idx] = d;
      }
    }
  }

  PropagationResult result;
  result.labeling = compact_labels(raw);

  // carry the compaction map onto pair regions and collect region stats
  std::unordered_map<int32_t, int32_t> remap;
  for (size_t i = 0; i < raw.size(); ++i)
    if (raw[i] != 0) remap.emplace(raw[i], result.labeling.labels[i]);
  result.pair_region.assign(pairs.size(), 0);
  result.region_scores.assign(result.labeling.num_instances, 0.0);
  result.region_sizes.assign(result.labeling.num_instances, 0);
  for (size_t pi = 0; pi < pairs.size(); ++pi) {
    auto it = remap.find(pair_region_raw[pi]);
    if (it == remap.end()) continue;
    result.pair_region[pi] = it->second;
    auto& score = result.region_scores[it->second - 1];
    score = std::max(score, pairs[pi].score);
  }
  for (int32_t l : result.labeling.labels)
    if (l > 0) ++result.region_sizes[l - 1];
  return result;
}

}  // namespace pointseg
