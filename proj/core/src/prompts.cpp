#include "pointseg/prompts.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

namespace pointseg {

using nlohmann::json;

namespace {

struct Registry {
  std::map<std::string, PointBackendFactory> point;
  std::map<std::string, BoxBackendFactory> box;
  std::mutex mutex;
};

Registry& registry() {
  static Registry r;
  return r;
}

// Reads prompt outputs from a response file written by an external process.
// params: {"path": "<response.json>", "request_path": "<optional request dir>"}
class FilePointBackend : public PointBranchBackend {
 public:
  explicit FilePointBackend(std::filesystem::path path) : path_(std::move(path)) {}
  PointBranchOutput run(const ScenePointCloud&, uint64_t) const override {
    PointBranchOutput points;
    BoxBranchOutput boxes;
    read_prompt_exchange(path_, points, boxes);
    if (points.features.size() != points.point_groups.size())
      throw BackendError("file backend: response lacks group_features");
    return points;
  }

 private:
  std::filesystem::path path_;
};

class FileBoxBackend : public BoxBranchBackend {
 public:
  explicit FileBoxBackend(std::filesystem::path path) : path_(std::move(path)) {}
  BoxBranchOutput run(const ScenePointCloud&, uint64_t) const override {
    PointBranchOutput points;
    BoxBranchOutput boxes;
    read_prompt_exchange(path_, points, boxes);
    if (boxes.features.size() != boxes.boxes.size())
      throw BackendError("file backend: response lacks box_features");
    return boxes;
  }

 private:
  std::filesystem::path path_;
};

std::filesystem::path file_backend_path(const PromptBackendSpec& spec) {
  if (!spec.params.contains("path"))
    throw BackendError("file backend requires a 'path' parameter");
  return spec.params.at("path").get<std::string>();
}

void register_file_backends() {
  static std::once_flag once;
  std::call_once(once, [] {
    register_point_backend("file", [](const PromptBackendSpec& spec, const BackendContext*) {
      return std::make_unique<FilePointBackend>(file_backend_path(spec));
    });
    register_box_backend("file", [](const PromptBackendSpec& spec, const BackendContext*) {
      return std::make_unique<FileBoxBackend>(file_backend_path(spec));
    });
  });
}

}  // namespace

void register_point_backend(const std::string& kind, PointBackendFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.point[kind] = std::move(factory);
}

void register_box_backend(const std::string& kind, BoxBackendFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.box[kind] = std::move(factory);
}

bool point_backend_registered(const std::string& kind) {
  register_file_backends();
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  return r.point.count(kind) > 0;
}

bool box_backend_registered(const std::string& kind) {
  register_file_backends();
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  return r.box.count(kind) > 0;
}

std::unique_ptr<PointBranchBackend> make_point_backend(const PromptBackendSpec& spec,
                                                       const BackendContext* ctx) {
  register_file_backends();
  auto& r = registry();
  PointBackendFactory factory;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.point.find(spec.kind);
    if (it == r.point.end())
      throw BackendError("unknown point backend kind '" + spec.kind + "'");
    factory = it->second;
  }
  return factory(spec, ctx);
}

std::unique_ptr<BoxBranchBackend> make_box_backend(const PromptBackendSpec& spec,
                                                   const BackendContext* ctx) {
  register_file_backends();
  auto& r = registry();
  BoxBackendFactory factory;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.box.find(spec.kind);
    if (it == r.box.end()) throw BackendError("unknown box backend kind '" + spec.kind + "'");
    factory = it->second;
  }
  return factory(spec, ctx);
}

void validate_point_branch_output(const PointBranchOutput& out, size_t cloud_size) {
  if (out.features.size() != out.point_groups.size())
    throw BackendError("point branch: one feature per group required");
  for (const auto& group : out.point_groups) {
    if (group.empty()) throw BackendError("point branch: empty point group");
    for (int idx : group)
      if (idx < 0 || static_cast<size_t>(idx) >= cloud_size)
        throw BackendError("point branch: point index out of range");
  }
  if (!out.logits.empty() && out.logits.size() != cloud_size)
    throw BackendError("point branch: logits row count != point count");
  for (const auto& f : out.features)
    if (std::abs(f.norm() - 1.0) > 1e-6)
      throw BackendError("point branch: group feature is not unit length");
}

void validate_box_branch_output(const BoxBranchOutput& out) {
  if (out.features.size() != out.boxes.size())
    throw BackendError("box branch: one feature per box required");
  for (const auto& b : out.boxes)
    if (!(b.size.array() > 0).all()) throw BackendError("box branch: non-positive box size");
  for (const auto& f : out.features)
    if (std::abs(f.norm() - 1.0) > 1e-6)
      throw BackendError("box branch: box feature is not unit length");
}

PointBranchOutput point_branch(const ScenePointCloud& cloud, const PromptBackendSpec& spec,
                               const BackendContext* ctx, uint64_t seed) {
  auto backend = make_point_backend(spec, ctx);
  PointBranchOutput out = backend->run(cloud, seed);
  if (out.features.empty() && !out.point_groups.empty()) {
    if (out.logits.empty())
      throw BackendError("point branch: backend returned neither features nor logits");
    out.features.reserve(out.point_groups.size());
    const size_t K = out.logits.empty() ? 0 : out.logits[0].size();
    for (const auto& group : out.point_groups) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
      for (int idx : group)
        for (size_t k = 0; k < K; ++k) mean[static_cast<Eigen::Index>(k)] += out.logits[idx][k];
      mean /= static_cast<double>(group.size());
      double n = mean.norm();
      if (n < 1e-12) throw BackendError("point branch: zero-norm pooled feature");
      out.features.push_back(mean / n);
    }
  }
  validate_point_branch_output(out, cloud.size());
  return out;
}

BoxBranchOutput box_branch(const ScenePointCloud& cloud, const PromptBackendSpec& spec,
                           const BackendContext* ctx, uint64_t seed) {
  auto backend = make_box_backend(spec, ctx);
  BoxBranchOutput out = backend->run(cloud, seed);
  validate_box_branch_output(out);
  return out;
}

json prompt_exchange_to_json(const PointBranchOutput& points, const BoxBranchOutput& boxes) {
  json doc;
  doc["groups"] = points.point_groups;
  doc["group_features"] = json::array();
  for (const auto& f : points.features)
    doc["group_features"].push_back(std::vector<double>(f.data(), f.data() + f.size()));
  doc["boxes"] = json::array();
  for (const auto& b : boxes.boxes) {
    doc["boxes"].push_back({{"center", {b.center.x(), b.center.y(), b.center.z()}},
                            {"size", {b.size.x(), b.size.y(), b.size.z()}}});
  }
  doc["box_features"] = json::array();
  for (const auto& f : boxes.features)
    doc["box_features"].push_back(std::vector<double>(f.data(), f.data() + f.size()));
  return doc;
}

void prompt_exchange_from_json(const json& doc, PointBranchOutput& points,
                               BoxBranchOutput& boxes) {
  points = {};
  boxes = {};
  points.point_groups = doc.at("groups").get<std::vector<std::vector<int>>>();
  for (const auto& jf : doc.value("group_features", json::array())) {
    auto vals = jf.get<std::vector<double>>();
    points.features.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size()));
  }
  for (const auto& jb : doc.value("boxes", json::array())) {
    Box3D b;
    auto c = jb.at("center").get<std::vector<double>>();
    auto s = jb.at("size").get<std::vector<double>>();
    if (c.size() != 3 || s.size() != 3)
      throw IoError("prompt exchange: center/size must have 3 entries");
    b.center = Eigen::Vector3d(c[0], c[1], c[2]);
    b.size = Eigen::Vector3d(s[0], s[1], s[2]);
    boxes.boxes.push_back(b);
  }
  for (const auto& jf : doc.value("box_features", json::array())) {
    auto vals = jf.get<std::vector<double>>();
    boxes.features.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size()));
  }
}

void write_prompt_exchange(const std::filesystem::path& path, const PointBranchOutput& points,
                           const BoxBranchOutput& boxes) {
  std::ofstream out(path);
  if (!out) throw IoError("prompt exchange: cannot open for writing: " + path.string());
  out << prompt_exchange_to_json(points, boxes).dump(2) << "\n";
}

void read_prompt_exchange(const std::filesystem::path& path, PointBranchOutput& points,
                          BoxBranchOutput& boxes) {
  std::ifstream in(path);
  if (!in) throw IoError("prompt exchange: cannot open: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("prompt exchange: parse error: " + std::string(e.what()));
  }
  prompt_exchange_from_json(doc, points, boxes);
}

}  // namespace pointseg
