#include "pointseg/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace pointseg {

Eigen::Matrix4d CameraExtrinsics::world_to_camera() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

CameraExtrinsics CameraExtrinsics::from_world_to_camera(const Eigen::Matrix4d& m) {
  CameraExtrinsics e;
  e.rotation = m.topLeftCorner<3, 3>();
  e.translation = m.topRightCorner<3, 1>();
  return e;
}

bool Box3D::contains(const Eigen::Vector3d& p, double margin) const {
  Eigen::Vector3d lo = min().array() - margin;
  Eigen::Vector3d hi = max().array() + margin;
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

Box3D Box3D::expanded(double margin) const {
  Box3D b = *this;
  b.size = size.array() + 2.0 * margin;
  return b;
}

Box3D Box3D::bounding(const std::vector<Eigen::Vector3d>& points,
                      const std::vector<int>& indices, double min_size) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int idx : indices) {
    lo = lo.cwiseMin(points[idx]);
    hi = hi.cwiseMax(points[idx]);
  }
  Box3D b;
  b.center = 0.5 * (lo + hi);
  b.size = (hi - lo).cwiseMax(min_size);
  return b;
}

InstanceLabeling3D compact_labels(const std::vector<int32_t>& raw) {
  InstanceLabeling3D out;
  out.labels.resize(raw.size(), 0);
  std::unordered_map<int32_t, int32_t> remap;
  int32_t next = 1;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == 0) continue;
    auto it = remap.find(raw[i]);
    if (it == remap.end()) it = remap.emplace(raw[i], next++).first;
    out.labels[i] = it->second;
  }
  out.num_instances = next - 1;
  return out;
}

bool labels_are_compact(const InstanceLabeling3D& labeling) {
  std::vector<bool> seen(static_cast<size_t>(labeling.num_instances) + 1, false);
  for (int32_t l : labeling.labels) {
    if (l < 0 || l > labeling.num_instances) return false;
    if (l > 0) seen[l] = true;
  }
  for (int32_t l = 1; l <= labeling.num_instances; ++l)
    if (!seen[l]) return false;
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  if (ok()) {
    os << "scene valid";
  } else {
    os << violations.size() << " violation(s):";
    for (const auto& v : violations) os << "\n  - " << v;
  }
  return os.str();
}

namespace {

bool finite(const Eigen::Vector3d& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

}  // namespace

ValidationReport validate_scene(const ScenePointCloud& cloud,
                                const std::vector<PosedFrame>& frames) {
  ValidationReport report;
  auto add = [&](const std::string& s) { report.violations.push_back(s); };

  if (cloud.size() == 0) add("point cloud is empty");
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (!finite(cloud.positions[i])) {
      add("point " + std::to_string(i) + " has non-finite coordinates");
      break;
    }
  }
  if (cloud.has_colors() && cloud.colors.size() != cloud.size())
    add("colors length " + std::to_string(cloud.colors.size()) + " != point count " +
        std::to_string(cloud.size()));

  for (const auto& f : frames) {
    const std::string tag = "frame " + std::to_string(f.frame_id) + ": ";
    const auto& in = f.intrinsics;
    if (in.fx <= 0 || in.fy <= 0) add(tag + "non-positive focal length");
    if (in.width <= 0 || in.height <= 0) add(tag + "non-positive image size");

    const Eigen::Matrix3d& r = f.extrinsics.rotation;
    double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err > 1e-6) add(tag + "extrinsics not orthonormal (err " + std::to_string(ortho_err) + ")");
    else if (std::abs(r.determinant() - 1.0) > 1e-6)
      add(tag + "extrinsics rotation is not proper (det != +1)");

    if (f.depth.width != in.width || f.depth.height != in.height)
      add(tag + "depth " + std::to_string(f.depth.width) + "x" + std::to_string(f.depth.height) +
          " does not match intrinsics " + std::to_string(in.width) + "x" + std::to_string(in.height));
    for (float d : f.depth.data) {
      if (d < 0 || !std::isfinite(d)) {
        add(tag + "negative or non-finite depth value");
        break;
      }
    }
  }
  return report;
}

}  // namespace pointseg
