#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pointseg/backend_context.hpp"
#include "pointseg/types.hpp"

namespace pointseg {

// Point branch: per-point class logits plus proposed 3D mask point groups
// with one descriptor per group.
struct PointBranchOutput {
  std::vector<std::vector<double>> logits;     // N x K; may be empty for file backends
  std::vector<std::vector<int>> point_groups;  // point indices per proposed mask
  std::vector<Eigen::VectorXd> features;       // unit L2, one per group
};

// Box branch: detector-style proposals with one descriptor per box.
struct BoxBranchOutput {
  std::vector<Box3D> boxes;
  std::vector<Eigen::VectorXd> features;  // unit L2, one per box
};

struct PromptBackendSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
};

class PointBranchBackend {
 public:
  virtual ~PointBranchBackend() = default;
  virtual PointBranchOutput run(const ScenePointCloud& cloud, uint64_t seed) const = 0;
};

class BoxBranchBackend {
 public:
  virtual ~BoxBranchBackend() = default;
  virtual BoxBranchOutput run(const ScenePointCloud& cloud, uint64_t seed) const = 0;
};

using PointBackendFactory = std::function<std::unique_ptr<PointBranchBackend>(
    const PromptBackendSpec&, const BackendContext*)>;
using BoxBackendFactory = std::function<std::unique_ptr<BoxBranchBackend>(
    const PromptBackendSpec&, const BackendContext*)>;

void register_point_backend(const std::string& kind, PointBackendFactory factory);
void register_box_backend(const std::string& kind, BoxBackendFactory factory);
bool point_backend_registered(const std::string& kind);
bool box_backend_registered(const std::string& kind);

std::unique_ptr<PointBranchBackend> make_point_backend(const PromptBackendSpec& spec,
                                                       const BackendContext* ctx);
std::unique_ptr<BoxBranchBackend> make_box_backend(const PromptBackendSpec& spec,
                                                   const BackendContext* ctx);

// Dispatches to the configured backend and normalizes the result: group
// descriptors default to the L2-normalized mean of member logit vectors when
// the backend supplies none, and the output is validated against the cloud.
PointBranchOutput point_branch(const ScenePointCloud& cloud, const PromptBackendSpec& spec,
                               const BackendContext* ctx = nullptr, uint64_t seed = 0);
BoxBranchOutput box_branch(const ScenePointCloud& cloud, const PromptBackendSpec& spec,
                           const BackendContext* ctx = nullptr, uint64_t seed = 0);

// Throw BackendError when structure or invariants are broken.
void validate_point_branch_output(const PointBranchOutput& out, size_t cloud_size);
void validate_box_branch_output(const BoxBranchOutput& out);

// File exchange schema shared with out-of-process backends:
// {"groups": [[i,...]], "group_features": [[...]], "boxes":
//  [{"center":[x,y,z],"size":[w,h,l]}], "box_features": [[...]]}
nlohmann::json prompt_exchange_to_json(const PointBranchOutput& points,
                                       const BoxBranchOutput& boxes);
void prompt_exchange_from_json(const nlohmann::json& doc, PointBranchOutput& points,
                               BoxBranchOutput& boxes);
void write_prompt_exchange(const std::filesystem::path& path, const PointBranchOutput& points,
                           const BoxBranchOutput& boxes);
void read_prompt_exchange(const std::filesystem::path& path, PointBranchOutput& points,
                          BoxBranchOutput& boxes);

}  // namespace pointseg
