#pragma once

#include <vector>

#include "pointseg/types.hpp"

namespace pointseg {

// Ground-truth context handed to oracle backends. File-exchange backends
// ignore it; oracle kinds refuse to run without it.
struct BackendContext {
  const ScenePointCloud* cloud = nullptr;
  const InstanceLabeling3D* gt = nullptr;
  const std::vector<int>* instance_shape_class = nullptr;  // per instance, 0-based
  const std::vector<PosedFrame>* frames = nullptr;
  const std::vector<Image<int32_t>>* frame_gt_ids = nullptr;  // parallel to frames
  int num_shape_classes = 3;

  const Image<int32_t>* gt_ids_for_frame(int frame_id) const {
    if (!frames || !frame_gt_ids) return nullptr;
    for (size_t i = 0; i < frames->size() && i < frame_gt_ids->size(); ++i)
      if ((*frames)[i].frame_id == frame_id) return &(*frame_gt_ids)[i];
    return nullptr;
  }
};

}  // namespace pointseg
