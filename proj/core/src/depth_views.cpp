#include "pointseg/depth_views.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pointseg {

namespace {

constexpr float kInvalid = -1.0f;

void check_params(const DepthViewParams& p) {
  if (p.grid_h < 8 || p.grid_w < 8 || p.grid_d < 8)
    throw ConfigError("depth views: grid dimensions must be >= 8");
  if (p.num_views < 1) throw ConfigError("depth views: need at least one view");
  if (p.scale <= 0 || p.scale > 1) throw ConfigError("depth views: scale must be in (0,1]");
}

int cell_index(double s, int dim, double coord) {
  int idx = static_cast<int>(std::ceil(s * dim * coord));
  return std::clamp(idx, 0, dim - 1);
}

Eigen::Matrix3d rotation_for_direction(const Eigen::Vector3d& forward_unit) {
  Eigen::Vector3d forward = forward_unit.normalized();
  Eigen::Vector3d world_up(0, 0, 1);
  Eigen::Vector3d right = forward.cross(world_up);
  if (right.norm() < 1e-9) right = Eigen::Vector3d(1, 0, 0);  // top-down view
  right.normalize();
  Eigen::Vector3d up = right.cross(forward).normalized();
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = up.transpose();
  r.row(2) = forward.transpose();
  return r;
}

}  // namespace

void DepthView::cell_of(const Eigen::Vector3d& p, const DepthViewParams& params, int& row,
                        int& col, double& z_norm) const {
  Eigen::Vector3d local = rotation * p;
  Eigen::Vector3d q;
  for (int a = 0; a < 3; ++a) {
    double extent = bbox_max[a] - bbox_min[a];
    q[a] = extent < 1e-12 ? 0.5 : (local[a] - bbox_min[a]) / extent;
  }
  row = cell_index(params.scale, params.grid_h, q.x());
  col = cell_index(params.scale, params.grid_w, q.y());
  z_norm = q.z();
}

std::vector<Eigen::Matrix3d> virtual_view_rotations(int num_views, double elevation_deg) {
  std::vector<Eigen::Matrix3d> rotations;
  rotations.reserve(num_views);
  const bool with_topdown = num_views >= 5;
  const int azimuths = with_topdown ? num_views - 1 : num_views;
  const double elev = elevation_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < azimuths; ++i) {
    double az = 2.0 * std::numbers::pi * i / azimuths;
    // camera sits at (az, elev) looking toward the cloud
    Eigen::Vector3d eye_dir(std::cos(az) * std::cos(elev), std::sin(az) * std::cos(elev),
                            std::sin(elev));
    rotations.push_back(rotation_for_direction(-eye_dir));
  }
  if (with_topdown) rotations.push_back(rotation_for_direction(Eigen::Vector3d(0, 0, -1)));
  return rotations;
}

Image<float> quantize_view(const std::vector<Eigen::Vector3d>& normalized_points,
                           const DepthViewParams& params, Image<uint8_t>& valid) {
  Image<float> buf(params.grid_w, params.grid_h, kInvalid);
  valid = Image<uint8_t>(params.grid_w, params.grid_h, 0);
  for (const auto& q : normalized_points) {
    int row = cell_index(params.scale, params.grid_h, q.x());
    int col = cell_index(params.scale, params.grid_w, q.y());
    float z = static_cast<float>(q.z());
    if (!valid(row, col) || z < buf(row, col)) {
      buf(row, col) = z;
      valid(row, col) = 1;
    }
  }
  return buf;
}

Image<float> densify_max(const Image<float>& img, const Image<uint8_t>& valid, int kernel,
                         Image<uint8_t>& valid_out) {
  const int r = kernel / 2;
  Image<float> out(img.width, img.height, kInvalid);
  valid_out = Image<uint8_t>(img.width, img.height, 0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float best = kInvalid;
      bool any = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          int yy = y + dy, xx = x + dx;
          if (!img.in_bounds(yy, xx) || !valid(yy, xx)) continue;
          best = any ? std::max(best, img(yy, xx)) : img(yy, xx);
          any = true;
        }
      }
      if (any) {
        out(y, x) = best;
        valid_out(y, x) = 1;
      }
    }
  }
  return out;
}

Image<float> gaussian_smooth(const Image<float>& img, const Image<uint8_t>& valid, double sigma) {
  if (sigma <= 0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));

  // separable convolution, renormalized over valid support
  Image<float> tmp(img.width, img.height, kInvalid);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!valid(y, x)) continue;
      double acc = 0, wsum = 0;
      for (int i = -radius; i <= radius; ++i) {
        int xx = x + i;
        if (xx < 0 || xx >= img.width || !valid(y, xx)) continue;
        acc += kernel[i + radius] * img(y, xx);
        wsum += kernel[i + radius];
      }
      tmp(y, x) = static_cast<float>(acc / wsum);
    }
  }
  Image<float> out(img.width, img.height, kInvalid);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!valid(y, x)) continue;
      double acc = 0, wsum = 0;
      for (int i = -radius; i <= radius; ++i) {
        int yy = y + i;
        if (yy < 0 || yy >= img.height || !valid(yy, x)) continue;
        acc += kernel[i + radius] * tmp(yy, x);
        wsum += kernel[i + radius];
      }
      out(y, x) = static_cast<float>(acc / wsum);
    }
  }
  return out;
}

void squeeze(Image<float>& img, const Image<uint8_t>& valid) {
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (size_t i = 0; i < img.data.size(); ++i) {
    if (!valid.data[i]) continue;
    lo = std::min(lo, img.data[i]);
    hi = std::max(hi, img.data[i]);
  }
  const float extent = hi - lo;
  for (size_t i = 0; i < img.data.size(); ++i) {
    if (!valid.data[i]) {
      img.data[i] = 0.0f;
    } else {
      img.data[i] = extent < 1e-12f ? 0.5f : (img.data[i] - lo) / extent;
    }
  }
}

DepthViewSet render_depth_views(const ScenePointCloud& cloud, const DepthViewParams& params,
                                int threads) {
  check_params(params);
  if (cloud.size() == 0) throw ConfigError("depth views: empty cloud");

  DepthViewSet set;
  set.params = params;
  set.views.resize(params.num_views);
  auto rotations = virtual_view_rotations(params.num_views, params.elevation_deg);

  parallel_for(static_cast<size_t>(params.num_views), threads, [&](size_t vi) {
    DepthView& view = set.views[vi];
    view.rotation = rotations[vi];

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    std::vector<Eigen::Vector3d> local(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
      local[i] = view.rotation * cloud.positions[i];
      lo = lo.cwiseMin(local[i]);
      hi = hi.cwiseMax(local[i]);
    }
    view.bbox_min = lo;
    view.bbox_max = hi;

    std::vector<Eigen::Vector3d> normalized(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        double extent = hi[a] - lo[a];
        normalized[i][a] = extent < 1e-12 ? 0.5 : (local[i][a] - lo[a]) / extent;
      }
    }

    view.raw = quantize_view(normalized, params, view.raw_valid);
    Image<float> dense = densify_max(view.raw, view.raw_valid, params.densify_kernel, view.valid);
    dense = gaussian_smooth(dense, view.valid, params.smooth_sigma);
    squeeze(dense, view.valid);
    view.depth = std::move(dense);
  });
  return set;
}

FusedLogits fuse_multiview_logits(const DepthViewSet& views,
                                  const std::vector<ViewScores>& per_view_scores,
                                  const ScenePointCloud& cloud, double depth_tol) {
  const size_t S = views.views.size();
  if (per_view_scores.size() != S)
    throw ConfigError("fuse: score maps and views differ in count");
  if (S == 0 || per_view_scores[0].empty()) throw ConfigError("fuse: no score maps");
  const size_t K = per_view_scores[0].size();
  for (const auto& vs : per_view_scores) {
    if (vs.size() != K) throw ConfigError("fuse: inconsistent class count across views");
    for (const auto& img : vs)
      if (img.width != views.params.grid_w || img.height != views.params.grid_h)
        throw ConfigError("fuse: score map size does not match the view grid");
  }
  if (depth_tol < 0) depth_tol = 1.0 / views.params.grid_d;

  const size_t N = cloud.size();
  FusedLogits out;
  out.logits.assign(N, std::vector<double>(K, 0.0));
  out.covered.assign(N, 0);

  std::vector<int> contributions(N, 0);
  for (size_t vi = 0; vi < S; ++vi) {
    const DepthView& view = views.views[vi];
    for (size_t i = 0; i < N; ++i) {
      int row, col;
      double z;
      view.cell_of(cloud.positions[i], views.params, row, col, z);
      if (!view.raw_valid(row, col)) continue;
      if (std::abs(z - static_cast<double>(view.raw(row, col))) > depth_tol) continue;
      for (size_t k = 0; k < K; ++k) out.logits[i][k] += per_view_scores[vi][k](row, col);
      ++contributions[i];
    }
  }
  for (size_t i = 0; i < N; ++i) {
    if (contributions[i] == 0) {
      std::fill(out.logits[i].begin(), out.logits[i].end(), 1.0 / static_cast<double>(K));
    } else {
      for (auto& v : out.logits[i]) v /= contributions[i];
      out.covered[i] = 1;
    }
  }
  return out;
}

}  // namespace pointseg
