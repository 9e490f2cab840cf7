#include "pointseg/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pointseg {

ProjectedPoint project_point(const Eigen::Vector3d& p, const PosedFrame& frame) {
  ProjectedPoint out;
  Eigen::Vector3d cam = frame.extrinsics.rotation * p + frame.extrinsics.translation;
  out.depth = cam.z();
  if (cam.z() <= 0) return out;  // behind the camera (or on its plane)
  const auto& in = frame.intrinsics;
  out.u = in.fx * cam.x() / cam.z() + in.cx;
  out.v = in.fy * cam.y() / cam.z() + in.cy;
  out.inside = out.u >= 0 && out.u < in.width && out.v >= 0 && out.v < in.height;
  return out;
}

float depth_sample(const PosedFrame& frame, double u, double v) {
  int col = std::clamp(static_cast<int>(std::lround(u)), 0, frame.intrinsics.width - 1);
  int row = std::clamp(static_cast<int>(std::lround(v)), 0, frame.intrinsics.height - 1);
  return frame.depth(row, col);
}

bool is_visible(const Eigen::Vector3d& p, const PosedFrame& frame, double depth_tol) {
  ProjectedPoint proj = project_point(p, frame);
  if (!proj.inside) return false;
  float recorded = depth_sample(frame, proj.u, proj.v);
  if (recorded <= 0) return false;  // depth hole
  return std::abs(proj.depth - static_cast<double>(recorded)) <= depth_tol;
}

std::optional<Box2D> project_box(const Box3D& box, const PosedFrame& frame) {
  const Eigen::Vector3d lo = box.min(), hi = box.max();
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  int usable = 0;
  for (int i = 0; i < 8; ++i) {
    Eigen::Vector3d corner((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                           (i & 4) ? hi.z() : lo.z());
    Eigen::Vector3d cam = frame.extrinsics.rotation * corner + frame.extrinsics.translation;
    if (cam.z() <= 0) continue;  // corner behind the camera contributes nothing
    double u = frame.intrinsics.fx * cam.x() / cam.z() + frame.intrinsics.cx;
    double v = frame.intrinsics.fy * cam.y() / cam.z() + frame.intrinsics.cy;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
    ++usable;
  }
  if (usable == 0) return std::nullopt;
  umin = std::max(umin, 0.0);
  vmin = std::max(vmin, 0.0);
  umax = std::min(umax, static_cast<double>(frame.intrinsics.width));
  vmax = std::min(vmax, static_cast<double>(frame.intrinsics.height));
  if (umax - umin <= 0 || vmax - vmin <= 0) return std::nullopt;
  return Box2D{umin, vmin, umax - umin, vmax - vmin};
}

}  // namespace pointseg
