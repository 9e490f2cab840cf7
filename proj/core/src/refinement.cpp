#include "pointseg/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>

#include "pointseg/projection.hpp"

namespace pointseg {

using nlohmann::json;

namespace {

struct SegRegistry {
  std::map<std::string, SegmenterFactory> factories;
  std::mutex mutex;
};

SegRegistry& seg_registry() {
  static SegRegistry r;
  return r;
}

// Single-exchange file segmenter: writes the request next to the expected
// response and reads the response an external process must have produced.
class FileSegmenter : public Segmenter {
 public:
  FileSegmenter(std::filesystem::path dir, bool write_requests)
      : dir_(std::move(dir)), write_requests_(write_requests) {}

  Image<uint8_t> segment(const FramePrompt& prompt, const PosedFrame&,
                         const Image<uint8_t>* prior, uint64_t seed) const override {
    char name[96];
    std::snprintf(name, sizeof(name), "pair%04d_frame%05d_%016llx", prompt.pair_id,
                  prompt.frame_id, static_cast<unsigned long long>(seed));
    if (write_requests_)
      write_segment_request(dir_ / (std::string("req_") + name + ".json"), prompt, prior);
    auto resp = dir_ / (std::string("resp_") + name + ".json");
    if (!std::filesystem::exists(resp))
      throw BackendError("file segmenter: missing response " + resp.string());
    return read_segment_response(resp);
  }
  bool thread_safe() const override { return false; }

 private:
  std::filesystem::path dir_;
  bool write_requests_;
};

void register_file_segmenter() {
  static std::once_flag once;
  std::call_once(once, [] {
    register_segmenter("file", [](const SegmenterSpec& spec, const BackendContext*) {
      if (!spec.params.contains("dir"))
        throw BackendError("file segmenter requires a 'dir' parameter");
      bool write_requests = spec.params.value("write_requests", true);
      return std::make_unique<FileSegmenter>(spec.params.at("dir").get<std::string>(),
                                             write_requests);
    });
  });
}

}  // namespace

void register_segmenter(const std::string& kind, SegmenterFactory factory) {
  auto& r = seg_registry();
  std::lock_guard lock(r.mutex);
  r.factories[kind] = std::move(factory);
}

bool segmenter_registered(const std::string& kind) {
  register_file_segmenter();
  auto& r = seg_registry();
  std::lock_guard lock(r.mutex);
  return r.factories.count(kind) > 0;
}

std::unique_ptr<Segmenter> make_segmenter(const SegmenterSpec& spec, const BackendContext* ctx) {
  register_file_segmenter();
  auto& r = seg_registry();
  SegmenterFactory factory;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(spec.kind);
    if (it == r.factories.end())
      throw BackendError("unknown segmenter kind '" + spec.kind + "'");
    factory = it->second;
  }
  return factory(spec, ctx);
}

namespace {

template <typename Vec>
size_t exact_medoid(const std::vector<Vec>& pts) {
  size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i) {
    double sum = 0;
    for (size_t j = 0; j < pts.size(); ++j) sum += (pts[i] - pts[j]).norm();
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

// Weiszfeld geometric median, then the total distance is evaluated exactly
// for the nearest candidates only.
template <typename Vec>
size_t guided_medoid(const std::vector<Vec>& pts, size_t candidate_count) {
  Vec median = Vec::Zero();
  for (const auto& p : pts) median += p;
  median /= static_cast<double>(pts.size());
  for (int iter = 0; iter < 24; ++iter) {
    Vec acc = Vec::Zero();
    double wsum = 0;
    for (const auto& p : pts) {
      double d = (p - median).norm();
      if (d < 1e-9) continue;
      acc += p / d;
      wsum += 1.0 / d;
    }
    if (wsum < 1e-12) break;
    Vec next = acc / wsum;
    if ((next - median).norm() < 1e-9) {
      median = next;
      break;
    }
    median = next;
  }

  std::vector<std::pair<double, size_t>> by_dist(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) by_dist[i] = {(pts[i] - median).norm(), i};
  std::sort(by_dist.begin(), by_dist.end());
  candidate_count = std::min(candidate_count, pts.size());

  size_t best = by_dist[0].second;
  double best_sum = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < candidate_count; ++c) {
    size_t i = by_dist[c].second;
    double sum = 0;
    for (size_t j = 0; j < pts.size(); ++j) sum += (pts[i] - pts[j]).norm();
    if (sum < best_sum || (sum == best_sum && i < best)) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

constexpr size_t kExactMedoidLimit = 1024;

}  // namespace

size_t medoid_index(const std::vector<Eigen::Vector2d>& points) {
  if (points.empty()) throw std::invalid_argument("medoid of empty set");
  if (points.size() <= kExactMedoidLimit) return exact_medoid(points);
  return guided_medoid(points, 256);
}

size_t medoid_index3d(const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) throw std::invalid_argument("medoid of empty set");
  if (points.size() <= kExactMedoidLimit) return exact_medoid(points);
  return guided_medoid(points, 256);
}

std::optional<FramePrompt> project_prompt_pair(const PromptPair& pair,
                                               const ScenePointCloud& cloud,
                                               const PosedFrame& frame, double depth_tol,
                                               int min_visible) {
  std::vector<Eigen::Vector2d> visible;
  visible.reserve(pair.points.size());
  for (int idx : pair.points) {
    if (!is_visible(cloud.positions[idx], frame, depth_tol)) continue;
    ProjectedPoint p = project_point(cloud.positions[idx], frame);
    visible.emplace_back(p.u, p.v);
  }
  if (static_cast<int>(visible.size()) < min_visible) return std::nullopt;

  FramePrompt prompt;
  prompt.pixel = visible[medoid_index(visible)];
  prompt.pair_id = pair.pair_id;
  prompt.frame_id = frame.frame_id;

  if (auto box = project_box(pair.box, frame)) {
    prompt.box2d = *box;
  } else {
    double umin = visible[0].x(), umax = umin, vmin = visible[0].y(), vmax = vmin;
    for (const auto& p : visible) {
      umin = std::min(umin, p.x());
      umax = std::max(umax, p.x());
      vmin = std::min(vmin, p.y());
      vmax = std::max(vmax, p.y());
    }
    prompt.box2d = Box2D{umin, vmin, std::max(umax - umin, 1.0), std::max(vmax - vmin, 1.0)};
  }
  return prompt;
}

double mask_change_ratio(const Image<uint8_t>& current, const Image<uint8_t>& previous) {
  size_t changed = 0, prev_fg = 0;
  for (size_t i = 0; i < current.data.size(); ++i) {
    changed += current.data[i] != previous.data[i];
    prev_fg += previous.data[i] != 0;
  }
  return static_cast<double>(changed) / static_cast<double>(std::max<size_t>(1, prev_fg));
}

IprResult iterative_post_refinement(const FramePrompt& prompt, const PosedFrame& frame,
                                    const Segmenter& segmenter, const IprConfig& cfg,
                                    uint64_t seed) {
  if (cfg.adaptive && (cfg.theta <= 0 || cfg.theta >= 1))
    throw ConfigError("iterative refinement: theta must be in (0,1)");
  if (cfg.max_iter < 1) throw ConfigError("iterative refinement: max_iter must be >= 1");

  IprResult result;
  result.mask = segmenter.segment(prompt, frame, nullptr, mix_seed(seed, 0));
  const int cap = cfg.adaptive ? cfg.max_iter : std::min(cfg.fixed_iterations, cfg.max_iter);
  for (int i = 1; i <= cap; ++i) {
    Image<uint8_t> next = segmenter.segment(prompt, frame, &result.mask, mix_seed(seed, i));
    result.last_delta = mask_change_ratio(next, result.mask);
    result.mask = std::move(next);
    result.iterations = i;
    if (cfg.adaptive && result.last_delta <= cfg.theta) break;
  }
  return result;
}

Rle rle_encode(const Image<uint8_t>& mask) {
  Rle rle;
  rle.width = mask.width;
  rle.height = mask.height;
  uint8_t value = 0;
  int run = 0;
  for (uint8_t px : mask.data) {
    uint8_t bit = px ? 1 : 0;
    if (bit == value) {
      ++run;
    } else {
      rle.runs.push_back(run);
      value = bit;
      run = 1;
    }
  }
  rle.runs.push_back(run);
  return rle;
}

Image<uint8_t> rle_decode(const Rle& rle) {
  Image<uint8_t> mask(rle.width, rle.height, 0);
  size_t pos = 0;
  uint8_t value = 0;
  for (int run : rle.runs) {
    if (run < 0 || pos + run > mask.data.size()) throw IoError("rle: runs exceed image size");
    if (value)
      std::fill(mask.data.begin() + pos, mask.data.begin() + pos + run, uint8_t{1});
    pos += run;
    value ^= 1;
  }
  if (pos != mask.data.size()) throw IoError("rle: runs do not cover the image");
  return mask;
}

json rle_to_json(const Rle& rle) {
  return json{{"width", rle.width}, {"height", rle.height}, {"runs", rle.runs}};
}

Rle rle_from_json(const json& doc) {
  Rle rle;
  rle.width = doc.at("width").get<int>();
  rle.height = doc.at("height").get<int>();
  rle.runs = doc.at("runs").get<std::vector<int>>();
  return rle;
}

json segment_request_to_json(const FramePrompt& prompt, const Image<uint8_t>* prior_mask) {
  json doc;
  doc["frame_id"] = prompt.frame_id;
  doc["pair_id"] = prompt.pair_id;
  doc["pixel"] = {prompt.pixel.x(), prompt.pixel.y()};
  doc["box"] = {prompt.box2d.u, prompt.box2d.v, prompt.box2d.w, prompt.box2d.h};
  if (prior_mask) doc["prior_rle"] = rle_to_json(rle_encode(*prior_mask));
  return doc;
}

void write_segment_request(const std::filesystem::path& path, const FramePrompt& prompt,
                           const Image<uint8_t>* prior_mask) {
  std::ofstream out(path);
  if (!out) throw IoError("segment request: cannot open for writing: " + path.string());
  out << segment_request_to_json(prompt, prior_mask).dump() << "\n";
}

Image<uint8_t> read_segment_response(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("segment response: cannot open: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("segment response: parse error: " + std::string(e.what()));
  }
  return rle_decode(rle_from_json(doc.at("rle")));
}

}  // namespace pointseg
