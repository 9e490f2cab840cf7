#include "pointseg/ply_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pointseg {

namespace {

struct PropSpec {
  std::string type;
  std::string name;
};

size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw IoError("ply: unsupported property type '" + t + "'");
}

double parse_binary_value(const char* p, const std::string& t) {
  auto load = [&]<typename T>() {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return load.operator()<int8_t>();
  if (t == "uchar" || t == "uint8") return load.operator()<uint8_t>();
  if (t == "short" || t == "int16") return load.operator()<int16_t>();
  if (t == "ushort" || t == "uint16") return load.operator()<uint16_t>();
  if (t == "int" || t == "int32") return load.operator()<int32_t>();
  if (t == "uint" || t == "uint32") return load.operator()<uint32_t>();
  if (t == "float" || t == "float32") return load.operator()<float>();
  return load.operator()<double>();
}

// Stable qualitative palette for instance visualization.
std::array<uint8_t, 3> label_color(int32_t label) {
  if (label == 0) return {128, 128, 128};
  static const std::array<std::array<uint8_t, 3>, 12> palette = {{{230, 25, 75},
                                                                  {60, 180, 75},
                                                                  {255, 225, 25},
                                                                  {0, 130, 200},
                                                                  {245, 130, 48},
                                                                  {145, 30, 180},
                                                                  {70, 240, 240},
                                                                  {240, 50, 230},
                                                                  {210, 245, 60},
                                                                  {250, 190, 212},
                                                                  {0, 128, 128},
                                                                  {170, 110, 40}}};
  uint64_t h = splitmix64(static_cast<uint64_t>(label));
  auto base = palette[(label - 1) % palette.size()];
  // jitter repeated palette entries so large label counts stay distinguishable
  int cycle = (label - 1) / static_cast<int>(palette.size());
  if (cycle > 0) {
    for (int c = 0; c < 3; ++c) {
      int v = base[c] + static_cast<int>((h >> (8 * c)) % 64) - 32;
      base[c] = static_cast<uint8_t>(std::min(255, std::max(32, v)));
    }
  }
  return base;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const ScenePointCloud& cloud,
               PlyFormat format, const InstanceLabeling3D* labels) {
  if (labels && labels->labels.size() != cloud.size())
    throw IoError("ply: labels length does not match point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("ply: cannot open for writing: " + path.string());

  const bool has_color = cloud.has_colors();
  out << "ply\nformat "
      << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (has_color)
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (labels) out << "property int label\n";
  out << "end_header\n";

  auto color_byte = [](float c) {
    int v = static_cast<int>(std::lround(c * 255.0f));
    return static_cast<uint8_t>(std::min(255, std::max(0, v)));
  };

  if (format == PlyFormat::Ascii) {
    out << std::setprecision(9);
    for (size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.positions[i];
      out << static_cast<float>(p.x()) << " " << static_cast<float>(p.y()) << " "
          << static_cast<float>(p.z());
      if (has_color)
        out << " " << int(color_byte(cloud.colors[i][0])) << " "
            << int(color_byte(cloud.colors[i][1])) << " " << int(color_byte(cloud.colors[i][2]));
      if (labels) out << " " << labels->labels[i];
      out << "\n";
    }
  } else {
    for (size_t i = 0; i < cloud.size(); ++i) {
      float xyz[3] = {static_cast<float>(cloud.positions[i].x()),
                      static_cast<float>(cloud.positions[i].y()),
                      static_cast<float>(cloud.positions[i].z())};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
      if (has_color) {
        uint8_t rgb[3] = {color_byte(cloud.colors[i][0]), color_byte(cloud.colors[i][1]),
                          color_byte(cloud.colors[i][2])};
        out.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
      }
      if (labels) {
        int32_t l = labels->labels[i];
        out.write(reinterpret_cast<const char*>(&l), sizeof(l));
      }
    }
  }
  if (!out) throw IoError("ply: write failed: " + path.string());
}

ScenePointCloud read_ply(const std::filesystem::path& path, InstanceLabeling3D* labels_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("ply: cannot open: " + path.string());

  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    throw IoError("ply: missing magic in " + path.string());

  bool ascii = false;
  size_t vertex_count = 0;
  std::vector<PropSpec> props;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") ascii = true;
      else if (fmt == "binary_little_endian") ascii = false;
      else throw IoError("ply: unsupported format " + fmt);
    } else if (tok == "element") {
      std::string name;
      size_t count;
      ls >> name >> count;
      in_vertex = (name == "vertex");
      if (in_vertex) vertex_count = count;
      else if (count > 0) throw IoError("ply: non-vertex elements are not supported");
    } else if (tok == "property" && in_vertex) {
      PropSpec p;
      ls >> p.type >> p.name;
      if (p.type == "list") throw IoError("ply: list properties are not supported");
      props.push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, il = -1;
  for (size_t i = 0; i < props.size(); ++i) {
    const auto& n = props[i].name;
    if (n == "x") ix = static_cast<int>(i);
    else if (n == "y") iy = static_cast<int>(i);
    else if (n == "z") iz = static_cast<int>(i);
    else if (n == "red") ir = static_cast<int>(i);
    else if (n == "green") ig = static_cast<int>(i);
    else if (n == "blue") ib = static_cast<int>(i);
    else if (n == "label") il = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw IoError("ply: missing x/y/z properties");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;

  ScenePointCloud cloud;
  cloud.positions.reserve(vertex_count);
  if (has_color) cloud.colors.reserve(vertex_count);
  if (labels_out) labels_out->labels.assign(vertex_count, 0);

  std::vector<double> row(props.size());
  if (ascii) {
    for (size_t v = 0; v < vertex_count; ++v) {
      for (size_t p = 0; p < props.size(); ++p)
        if (!(in >> row[p])) throw IoError("ply: truncated ascii data");
      cloud.positions.emplace_back(row[ix], row[iy], row[iz]);
      if (has_color)
        cloud.colors.push_back({static_cast<float>(row[ir] / 255.0),
                                static_cast<float>(row[ig] / 255.0),
                                static_cast<float>(row[ib] / 255.0)});
      if (labels_out && il >= 0) labels_out->labels[v] = static_cast<int32_t>(row[il]);
    }
  } else {
    size_t stride = 0;
    std::vector<size_t> offsets(props.size());
    for (size_t p = 0; p < props.size(); ++p) {
      offsets[p] = stride;
      stride += type_size(props[p].type);
    }
    std::vector<char> buf(stride);
    for (size_t v = 0; v < vertex_count; ++v) {
      in.read(buf.data(), static_cast<std::streamsize>(stride));
      if (!in) throw IoError("ply: truncated binary data");
      for (size_t p = 0; p < props.size(); ++p)
        row[p] = parse_binary_value(buf.data() + offsets[p], props[p].type);
      cloud.positions.emplace_back(row[ix], row[iy], row[iz]);
      if (has_color)
        cloud.colors.push_back({static_cast<float>(row[ir] / 255.0),
                                static_cast<float>(row[ig] / 255.0),
                                static_cast<float>(row[ib] / 255.0)});
      if (labels_out && il >= 0) labels_out->labels[v] = static_cast<int32_t>(row[il]);
    }
  }
  if (labels_out) {
    int32_t mx = 0;
    for (int32_t l : labels_out->labels) mx = std::max(mx, l);
    labels_out->num_instances = mx;
  }
  return cloud;
}

void write_labeled_ply(const std::filesystem::path& path, const ScenePointCloud& cloud,
                       const InstanceLabeling3D& labels, PlyFormat format) {
  if (labels.labels.size() != cloud.size())
    throw IoError("ply: labels length does not match point count");
  ScenePointCloud colored = cloud;
  colored.colors.resize(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    auto rgb = label_color(labels.labels[i]);
    colored.colors[i] = {rgb[0] / 255.0f, rgb[1] / 255.0f, rgb[2] / 255.0f};
  }
  write_ply(path, colored, format, &labels);
}

}  // namespace pointseg
