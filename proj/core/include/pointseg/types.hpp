#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointseg/common.hpp"

namespace pointseg {

// World frame: right-handed, +z up. Camera frame: right-handed, +z forward.
// Depth 0 is "no measurement", never "at camera".

struct ScenePointCloud {
  std::vector<Eigen::Vector3d> positions;           // meters, world frame
  std::vector<std::array<float, 3>> colors;         // rgb in [0,1]; empty or size N
  size_t size() const { return positions.size(); }
  bool has_colors() const { return !colors.empty(); }
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;  // focal lengths, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;
};

// world -> camera: p_cam = rotation * p_world + translation
struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Matrix4d world_to_camera() const;
  static CameraExtrinsics from_world_to_camera(const Eigen::Matrix4d& m);
};

struct PosedFrame {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  Image<float> depth;                                  // meters, 0 = invalid
  std::optional<Image<std::array<uint8_t, 3>>> color;  // optional rgb
  int frame_id = 0;
};

// Axis-aligned box in world coordinates.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Zero();  // w,h,l > 0
  std::optional<int> label_hint;

  Eigen::Vector3d min() const { return center - 0.5 * size; }
  Eigen::Vector3d max() const { return center + 0.5 * size; }
  double diagonal() const { return size.norm(); }
  bool contains(const Eigen::Vector3d& p, double margin = 0.0) const;
  Box3D expanded(double margin) const;
  static Box3D bounding(const std::vector<Eigen::Vector3d>& points,
                        const std::vector<int>& indices, double min_size = 1e-4);
};

// Pixel-space rectangle: (u, v) top-left, extents (w, h).
struct Box2D {
  double u = 0, v = 0, w = 0, h = 0;
};

// Per-pixel integer labels, 0 = background.
struct Mask2D {
  Image<int32_t> labels;
  int frame_id = 0;
};

// Per-point instance ids, 0 = unassigned. Nonzero labels are 1..num_instances.
struct InstanceLabeling3D {
  std::vector<int32_t> labels;
  int32_t num_instances = 0;
};

// Remaps nonzero labels onto a gap-free 1..K range (first appearance order)
// and sets num_instances accordingly.
InstanceLabeling3D compact_labels(const std::vector<int32_t>& raw);

// True when nonzero labels used are exactly {1..num_instances}.
bool labels_are_compact(const InstanceLabeling3D& labeling);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_scene(const ScenePointCloud& cloud,
                                const std::vector<PosedFrame>& frames);

}  // namespace pointseg
