#pragma once

#include <vector>

#include "pointseg/types.hpp"

namespace pointseg {

// Parameters of the multi-view depth rendering used by the point branch:
// points are rotated into each virtual view, min-max normalized to [0,1],
// quantized into an HxWxD grid (min depth wins), then densified, smoothed,
// and squeezed into a dense [0,1] depth map per view.
struct DepthViewParams {
  int grid_h = 128;
  int grid_w = 128;
  int grid_d = 64;
  double scale = 0.9;        // shape-size scale factor in (0,1]
  int num_views = 6;
  int densify_kernel = 3;    // k x k morphological max over valid cells
  double smooth_sigma = 1.0; // gaussian, pixels
  double elevation_deg = 30.0;
};

struct DepthView {
  Eigen::Matrix3d rotation;  // world -> view; view z is the depth axis
  Eigen::Vector3d bbox_min;  // normalization bounds in the view frame
  Eigen::Vector3d bbox_max;
  Image<float> raw;          // sparse min-depth buffer (normalized z)
  Image<uint8_t> raw_valid;
  Image<float> depth;        // densify -> smooth -> squeeze result, [0,1]
  Image<uint8_t> valid;

  // Grid cell and normalized depth of a world point under this view.
  void cell_of(const Eigen::Vector3d& p, const DepthViewParams& params, int& row, int& col,
               double& z_norm) const;
};

struct DepthViewSet {
  DepthViewParams params;
  std::vector<DepthView> views;
};

// Evenly spaced azimuth view directions around the cloud at fixed elevation;
// with 5+ views the last one is top-down.
std::vector<Eigen::Matrix3d> virtual_view_rotations(int num_views, double elevation_deg);

// One quantization pass: normalized points -> min-depth buffer.
// Exposed separately so the staging can be checked before densification.
Image<float> quantize_view(const std::vector<Eigen::Vector3d>& normalized_points,
                           const DepthViewParams& params, Image<uint8_t>& valid);

Image<float> densify_max(const Image<float>& img, const Image<uint8_t>& valid, int kernel,
                         Image<uint8_t>& valid_out);
Image<float> gaussian_smooth(const Image<float>& img, const Image<uint8_t>& valid, double sigma);
// Min-max normalizes valid cells into [0,1] in place; invalid cells become 0.
void squeeze(Image<float>& img, const Image<uint8_t>& valid);

DepthViewSet render_depth_views(const ScenePointCloud& cloud, const DepthViewParams& params,
                                int threads = 1);

// K score maps for one view.
using ViewScores = std::vector<Image<float>>;

struct FusedLogits {
  std::vector<std::vector<double>> logits;  // N x K
  std::vector<uint8_t> covered;             // 0 when no view contributed
};

// Averages, per point, the per-view scores at the point's grid cell over the
// views where the point wins (or nearly wins) the depth buffer. Points seen
// by no view get a uniform vector and covered=0. depth_tol is in normalized
// depth units; <0 selects one depth bin (1/D).
FusedLogits fuse_multiview_logits(const DepthViewSet& views,
                                  const std::vector<ViewScores>& per_view_scores,
                                  const ScenePointCloud& cloud, double depth_tol = -1.0);

}  // namespace pointseg
