#pragma once

#include <filesystem>
#include <vector>

#include "pointseg/types.hpp"

namespace pointseg {

// Depth file formats:
//   .f32  flat row-major float32 meters, no header (lossless)
//   .png  16-bit grayscale, millimeters (depth_scale counts per meter)
enum class DepthFormat { Float32, Png16 };

void write_depth_f32(const std::filesystem::path& path, const Image<float>& depth);
Image<float> read_depth_f32(const std::filesystem::path& path, int width, int height);

void write_depth_png16(const std::filesystem::path& path, const Image<float>& depth,
                       double depth_scale = 1000.0);
Image<float> read_depth_png16(const std::filesystem::path& path, double depth_scale = 1000.0);

// Frame manifest: JSON listing, per frame, intrinsics (fx, fy, cx, cy,
// width, height), a 4x4 row-major world-to-camera matrix, and the depth file.
void write_frame_manifest(const std::filesystem::path& manifest_path,
                          const std::vector<PosedFrame>& frames,
                          const std::vector<std::string>& depth_files,
                          double depth_scale = 1000.0);

// Loads frames along with their depth images (paths resolved relative to the
// manifest location).
std::vector<PosedFrame> read_frames(const std::filesystem::path& manifest_path);

// Writes depth files plus manifest into dir (depth/ subdirectory).
void write_frames(const std::filesystem::path& dir, const std::vector<PosedFrame>& frames,
                  DepthFormat format = DepthFormat::Float32);

}  // namespace pointseg
