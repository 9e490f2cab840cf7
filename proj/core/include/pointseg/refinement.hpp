#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>

#include "pointseg/backend_context.hpp"
#include "pointseg/matching.hpp"
#include "pointseg/types.hpp"

namespace pointseg {

// A prompt pair projected into one frame: a representative pixel (medoid of
// the visible projected member points) plus the projected box.
struct FramePrompt {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Box2D box2d;
  int pair_id = 0;
  int frame_id = 0;
};

struct SegmenterSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
};

// Promptable 2D segmenter: one pixel + one box in, binary mask out. The
// optional prior mask enables iterative refinement.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual Image<uint8_t> segment(const FramePrompt& prompt, const PosedFrame& frame,
                                 const Image<uint8_t>* prior_mask, uint64_t seed) const = 0;
  // Backends that cannot take concurrent calls declare themselves serial and
  // the driver serializes frame tasks.
  virtual bool thread_safe() const { return true; }
};

using SegmenterFactory =
    std::function<std::unique_ptr<Segmenter>(const SegmenterSpec&, const BackendContext*)>;

void register_segmenter(const std::string& kind, SegmenterFactory factory);
bool segmenter_registered(const std::string& kind);
std::unique_ptr<Segmenter> make_segmenter(const SegmenterSpec& spec, const BackendContext* ctx);

// Index of the member minimizing the total distance to the other members.
// Exact for small sets; large sets are resolved through a geometric-median
// guided candidate search.
size_t medoid_index(const std::vector<Eigen::Vector2d>& points);
size_t medoid_index3d(const std::vector<Eigen::Vector3d>& points);

// Projects a pair into a frame. nullopt when fewer than min_visible of the
// pair's points are visible there. The box falls back to the bounding
// rectangle of the visible projections when the 3D box cannot be projected.
std::optional<FramePrompt> project_prompt_pair(const PromptPair& pair,
                                               const ScenePointCloud& cloud,
                                               const PosedFrame& frame, double depth_tol,
                                               int min_visible = 3);

struct IprConfig {
  double theta = 0.05;  // stop when the mask change ratio falls below this
  int max_iter = 10;    // refinement iterations cap
  bool adaptive = true; // false: run exactly fixed_iterations refinements
  int fixed_iterations = 0;
};

struct IprResult {
  Image<uint8_t> mask;
  int iterations = 0;    // refinement passes performed (first mask not counted)
  double last_delta = 0;
};

// Feeds the segmenter's mask back as an extra prompt until the fraction of
// changed pixels (symmetric difference over previous foreground, guarded for
// empty masks) drops to theta, or the iteration cap is hit.
IprResult iterative_post_refinement(const FramePrompt& prompt, const PosedFrame& frame,
                                    const Segmenter& segmenter, const IprConfig& cfg,
                                    uint64_t seed);

double mask_change_ratio(const Image<uint8_t>& current, const Image<uint8_t>& previous);

// Run-length encoding of binary masks, row-major, starting with a zero run.
struct Rle {
  int width = 0;
  int height = 0;
  std::vector<int> runs;
};

Rle rle_encode(const Image<uint8_t>& mask);
Image<uint8_t> rle_decode(const Rle& rle);
nlohmann::json rle_to_json(const Rle& rle);
Rle rle_from_json(const nlohmann::json& doc);

// Request/response file protocol for out-of-process segmenters.
// Request: {"frame_id", "pixel":[u,v], "box":[u,v,w,h], "prior_rle"?}
// Response: {"rle": {...}}
nlohmann::json segment_request_to_json(const FramePrompt& prompt,
                                       const Image<uint8_t>* prior_mask);
void write_segment_request(const std::filesystem::path& path, const FramePrompt& prompt,
                           const Image<uint8_t>* prior_mask);
Image<uint8_t> read_segment_response(const std::filesystem::path& path);

}  // namespace pointseg
