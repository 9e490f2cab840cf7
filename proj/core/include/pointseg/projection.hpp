#pragma once

#include <optional>

#include "pointseg/types.hpp"

namespace pointseg {

struct ProjectedPoint {
  double u = 0, v = 0;    // continuous pixel coordinates
  double depth = 0;       // camera-frame z, meters
  bool inside = false;    // in front of the camera and within image bounds
};

// Pinhole projection of a world point: camera = R*p + t, then
// u = fx*x/z + cx, v = fy*y/z + cy. `inside` is false behind the camera or
// out of bounds.
ProjectedPoint project_point(const Eigen::Vector3d& p, const PosedFrame& frame);

// Nearest-pixel depth lookup, clamped to bounds.
float depth_sample(const PosedFrame& frame, double u, double v);

// True iff the point projects inside the frame, the depth map has a valid
// sample there, and the projected depth agrees with it within depth_tol.
bool is_visible(const Eigen::Vector3d& p, const PosedFrame& frame, double depth_tol);

// Pixel bounding rectangle of the box corners that project in front of the
// camera, clipped to image bounds. nullopt when no corner is usable or the
// clipped rectangle is empty.
std::optional<Box2D> project_box(const Box3D& box, const PosedFrame& frame);

}  // namespace pointseg
