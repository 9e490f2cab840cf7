#pragma once

#include <random>

#include "pointseg/backend_context.hpp"
#include "pointseg/prompts.hpp"
#include "pointseg/refinement.hpp"
#include "pointseg/types.hpp"

namespace pointseg {

enum class ShapeKind { Box = 0, Sphere = 1, Cylinder = 2 };

struct SceneSpec {
  int num_instances = 6;
  std::vector<ShapeKind> shapes = {ShapeKind::Box, ShapeKind::Sphere, ShapeKind::Cylinder};
  Eigen::Vector3d room_size = Eigen::Vector3d(6.0, 6.0, 3.0);
  int points_per_instance = 2000;
  double clutter_fraction = 0.2;  // fraction of the final cloud that is unlabeled
  int num_frames = 20;
  int image_width = 160;
  int image_height = 120;
  double focal = 140.0;
  double min_instance_size = 0.35;
  double max_instance_size = 0.85;
  double min_gap = 0.06;          // minimum AABB separation between instances
  double cluster_fraction = 0.5;  // chance an instance is placed next to an earlier one
  int max_place_retries = 4000;
  int splat_radius = 1;           // pixel splat radius for depth rendering
};

struct SyntheticScene {
  ScenePointCloud cloud;
  InstanceLabeling3D gt;
  std::vector<PosedFrame> frames;
  std::vector<Image<int32_t>> frame_gt_ids;  // per-pixel instance id, parallel to frames
  std::vector<int> instance_shape_class;     // 0-based shape kind per instance
  uint64_t seed = 0;
  SceneSpec spec;

  BackendContext context() const;
};

// Deterministic synthetic scene: non-overlapping surface-sampled primitives in
// a room, unlabeled clutter, and an orbiting camera with splat-rendered depth
// and per-pixel ground-truth instance ids. Throws ConfigError when the
// instances cannot be placed without overlap.
SyntheticScene generate_scene(const SceneSpec& spec, uint64_t seed);

// ---- noise primitives (deterministic given the rng state) ----

std::vector<int> apply_group_dropout(const std::vector<int>& group, double rate,
                                     std::mt19937_64& rng);

// Replaces a fraction of the group by random points outside the instance.
std::vector<int> apply_point_displacement(const std::vector<int>& group, double rate,
                                          const std::vector<int32_t>& gt_labels,
                                          int32_t own_label, std::mt19937_64& rng);

Box3D apply_box_jitter(const Box3D& box, double center_sigma, double size_sigma,
                       std::mt19937_64& rng);

// Square structuring element (Chebyshev), radius r.
Image<uint8_t> dilate_mask(const Image<uint8_t>& mask, int radius);
Image<uint8_t> erode_mask(const Image<uint8_t>& mask, int radius);

// Flips pixels with the given rate inside the mask's bounding box (expanded
// a little), leaving far-away background untouched.
void apply_speckle(Image<uint8_t>& mask, double rate, std::mt19937_64& rng);

// ---- noise bundles used by the ablation suites ----

struct NoisePreset {
  double group_dropout = 0;
  double point_displacement = 0;
  double box_center_sigma = 0;
  double box_size_sigma = 0;
  int mask_dilate = 0;
  int mask_erode = 0;
  double mask_speckle = 0;
};

NoisePreset zero_noise_preset();
// group dropout 0.15, box jitter sigma 0.05 m, mask dilation radius 2
NoisePreset standard_noise_preset();
// mask dilation radius 2 plus speckle 0.02: stresses the iterative refinement
NoisePreset boundary_noise_preset();

PromptBackendSpec oracle_point_spec(const NoisePreset& noise = {});
PromptBackendSpec oracle_box_spec(const NoisePreset& noise = {});
SegmenterSpec oracle_segmenter_spec(const NoisePreset& noise = {});

// Registers the "oracle" backend kinds; safe to call repeatedly.
void ensure_builtin_backends();

}  // namespace pointseg
