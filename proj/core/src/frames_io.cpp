#include "pointseg/frames_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

namespace pointseg {

using nlohmann::json;

void write_depth_f32(const std::filesystem::path& path, const Image<float>& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("depth: cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(depth.data.data()),
            static_cast<std::streamsize>(depth.data.size() * sizeof(float)));
  if (!out) throw IoError("depth: write failed: " + path.string());
}

Image<float> read_depth_f32(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("depth: cannot open: " + path.string());
  Image<float> depth(width, height);
  in.read(reinterpret_cast<char*>(depth.data.data()),
          static_cast<std::streamsize>(depth.data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(depth.data.size() * sizeof(float)))
    throw IoError("depth: file too short: " + path.string());
  return depth;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_depth_png16(const std::filesystem::path& path, const Image<float>& depth,
                       double depth_scale) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("png: cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: write error: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint16_t> row(depth.width);
  std::vector<png_byte> raw(static_cast<size_t>(depth.width) * 2);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      double scaled = std::lround(static_cast<double>(depth(v, u)) * depth_scale);
      row[u] = static_cast<uint16_t>(std::min(scaled, 65535.0));
    }
    for (int u = 0; u < depth.width; ++u) {  // big-endian per PNG spec
      raw[2 * u] = static_cast<png_byte>(row[u] >> 8);
      raw[2 * u + 1] = static_cast<png_byte>(row[u] & 0xff);
    }
    png_write_row(png, raw.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image<float> read_depth_png16(const std::filesystem::path& path, double depth_scale) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("png: cannot open: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: read error: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  int width = static_cast<int>(png_get_image_width(png, info));
  int height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: expected 16-bit grayscale: " + path.string());
  }

  Image<float> depth(width, height);
  std::vector<png_byte> raw(static_cast<size_t>(width) * 2);
  for (int v = 0; v < height; ++v) {
    png_read_row(png, raw.data(), nullptr);
    for (int u = 0; u < width; ++u) {
      uint16_t val = static_cast<uint16_t>((raw[2 * u] << 8) | raw[2 * u + 1]);
      depth(v, u) = static_cast<float>(val / depth_scale);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return depth;
}

void write_frame_manifest(const std::filesystem::path& manifest_path,
                          const std::vector<PosedFrame>& frames,
                          const std::vector<std::string>& depth_files, double depth_scale) {
  if (frames.size() != depth_files.size())
    throw IoError("manifest: frames and depth file lists differ in length");
  json doc;
  doc["depth_scale"] = depth_scale;
  doc["frames"] = json::array();
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    json jf;
    jf["frame_id"] = f.frame_id;
    jf["fx"] = f.intrinsics.fx;
    jf["fy"] = f.intrinsics.fy;
    jf["cx"] = f.intrinsics.cx;
    jf["cy"] = f.intrinsics.cy;
    jf["width"] = f.intrinsics.width;
    jf["height"] = f.intrinsics.height;
    Eigen::Matrix4d m = f.extrinsics.world_to_camera();
    std::vector<double> flat(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) flat[r * 4 + c] = m(r, c);
    jf["world_to_camera"] = flat;
    jf["depth_file"] = depth_files[i];
    doc["frames"].push_back(std::move(jf));
  }
  std::ofstream out(manifest_path);
  if (!out) throw IoError("manifest: cannot open for writing: " + manifest_path.string());
  out << doc.dump(2) << "\n";
}

std::vector<PosedFrame> read_frames(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("manifest: cannot open: " + manifest_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("manifest: parse error in " + manifest_path.string() + ": " + e.what());
  }
  double depth_scale = doc.value("depth_scale", 1000.0);
  auto base = manifest_path.parent_path();

  std::vector<PosedFrame> frames;
  for (const auto& jf : doc.at("frames")) {
    PosedFrame f;
    f.frame_id = jf.at("frame_id").get<int>();
    f.intrinsics.fx = jf.at("fx").get<double>();
    f.intrinsics.fy = jf.at("fy").get<double>();
    f.intrinsics.cx = jf.at("cx").get<double>();
    f.intrinsics.cy = jf.at("cy").get<double>();
    f.intrinsics.width = jf.at("width").get<int>();
    f.intrinsics.height = jf.at("height").get<int>();
    auto flat = jf.at("world_to_camera").get<std::vector<double>>();
    if (flat.size() != 16) throw IoError("manifest: world_to_camera must have 16 entries");
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = flat[r * 4 + c];
    f.extrinsics = CameraExtrinsics::from_world_to_camera(m);

    auto depth_path = base / jf.at("depth_file").get<std::string>();
    auto ext = depth_path.extension().string();
    if (ext == ".png")
      f.depth = read_depth_png16(depth_path, depth_scale);
    else
      f.depth = read_depth_f32(depth_path, f.intrinsics.width, f.intrinsics.height);
    if (f.depth.width != f.intrinsics.width || f.depth.height != f.intrinsics.height)
      throw IoError("manifest: depth size mismatch for frame " + std::to_string(f.frame_id));
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_frames(const std::filesystem::path& dir, const std::vector<PosedFrame>& frames,
                  DepthFormat format) {
  std::filesystem::create_directories(dir / "depth");
  std::vector<std::string> files;
  files.reserve(frames.size());
  char name[64];
  for (const auto& f : frames) {
    std::snprintf(name, sizeof(name), "depth/frame_%05d.%s", f.frame_id,
                  format == DepthFormat::Png16 ? "png" : "f32");
    if (format == DepthFormat::Png16)
      write_depth_png16(dir / name, f.depth);
    else
      write_depth_f32(dir / name, f.depth);
    files.emplace_back(name);
  }
  write_frame_manifest(dir / "frames.json", frames, files);
}

}  // namespace pointseg
