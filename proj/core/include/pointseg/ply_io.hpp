#pragma once

#include <filesystem>
#include <optional>

#include "pointseg/types.hpp"

namespace pointseg {

enum class PlyFormat { Ascii, BinaryLittleEndian };

// Writes vertices with float x/y/z, uchar red/green/blue when colors are
// present, and int label when a labeling is given.
void write_ply(const std::filesystem::path& path, const ScenePointCloud& cloud,
               PlyFormat format = PlyFormat::BinaryLittleEndian,
               const InstanceLabeling3D* labels = nullptr);

// Reads ascii or binary_little_endian PLY. Unknown vertex properties are
// skipped; non-vertex elements are ignored. Throws IoError on malformed input.
ScenePointCloud read_ply(const std::filesystem::path& path,
                         InstanceLabeling3D* labels_out = nullptr);

// Writes a point cloud colored by instance label (stable palette, label 0 gray).
void write_labeled_ply(const std::filesystem::path& path, const ScenePointCloud& cloud,
                       const InstanceLabeling3D& labels,
                       PlyFormat format = PlyFormat::BinaryLittleEndian);

}  // namespace pointseg
