#include "b2p/voxel/point_cloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "b2p/error.hpp"
#include "b2p/voxel/morton.hpp"

namespace b2p::voxel {
namespace {

enum class PropType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

PropType parse_type(const std::string& t) {
  if (t == "char" || t == "int8") return PropType::kInt8;
  if (t == "uchar" || t == "uint8") return PropType::kUInt8;
  if (t == "short" || t == "int16") return PropType::kInt16;
  if (t == "ushort" || t == "uint16") return PropType::kUInt16;
  if (t == "int" || t == "int32") return PropType::kInt32;
  if (t == "uint" || t == "uint32") return PropType::kUInt32;
  if (t == "float" || t == "float32") return PropType::kFloat32;
  if (t == "double" || t == "float64") return PropType::kFloat64;
  throw FormatError("ply: unknown property type '" + t + "'");
}

size_t type_size(PropType t) {
  switch (t) {
    case PropType::kInt8:
    case PropType::kUInt8: return 1;
    case PropType::kInt16:
    case PropType::kUInt16: return 2;
    case PropType::kInt32:
    case PropType::kUInt32:
    case PropType::kFloat32: return 4;
    case PropType::kFloat64: return 8;
  }
  return 0;
}

bool is_float(PropType t) { return t == PropType::kFloat32 || t == PropType::kFloat64; }

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  return v;
}

double read_binary(const char* p, PropType t) {
  switch (t) {
    case PropType::kInt8: return load_le<int8_t>(p);
    case PropType::kUInt8: return load_le<uint8_t>(p);
    case PropType::kInt16: return load_le<int16_t>(p);
    case PropType::kUInt16: return load_le<uint16_t>(p);
    case PropType::kInt32: return load_le<int32_t>(p);
    case PropType::kUInt32: return load_le<uint32_t>(p);
    case PropType::kFloat32: return load_le<float>(p);
    case PropType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  PropType type{};
  bool is_list = false;
};

struct Element {
  std::string name;
  size_t count = 0;
  std::vector<Property> props;
};

double to_unit_color(double v, PropType t) { return is_float(t) ? v : v / 255.0; }

}  // namespace

PointCloud canonicalize(std::vector<Coord> points, std::vector<Vec3> colors, int bit_depth) {
  if (points.size() != colors.size()) throw ConsistencyError("point/color count mismatch");
  std::vector<uint64_t> keys(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    try {
      keys[i] = morton_key(points[i], bit_depth);
    } catch (const RangeError&) {
      throw RangeError("point " + std::to_string(i) + " (" + std::to_string(points[i][0]) + "," +
                       std::to_string(points[i][1]) + "," + std::to_string(points[i][2]) + ") outside [0, 2^" +
                       std::to_string(bit_depth) + ")");
    }
  }
  std::vector<size_t> order(points.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return keys[a] < keys[b]; });

  PointCloud pc;
  pc.bit_depth = bit_depth;
  pc.points.reserve(points.size());
  pc.colors.reserve(points.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    Vec3 sum{0, 0, 0};
    while (j < order.size() && keys[order[j]] == keys[order[i]]) {
      for (int c = 0; c < 3; ++c) sum[c] += colors[order[j]][c];
      ++j;
    }
    const double n = static_cast<double>(j - i);
    pc.points.push_back(points[order[i]]);
    pc.colors.push_back({sum[0] / n, sum[1] / n, sum[2] / n});
    i = j;
  }
  return pc;
}

PointCloud voxelize(const std::vector<Vec3>& positions, const std::vector<Vec3>& colors, int bit_depth) {
  std::vector<Coord> pts(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double r = std::round(positions[i][a]);
      if (!std::isfinite(r) || r < -2147483648.0 || r > 2147483647.0) {
        throw RangeError("point " + std::to_string(i) + " has a non-representable coordinate");
      }
      pts[i][a] = static_cast<int32_t>(r);
    }
  }
  return canonicalize(std::move(pts), colors, bit_depth);
}

void validate(const PointCloud& pc) {
  if (pc.points.size() != pc.colors.size()) throw ConsistencyError("point/color count mismatch");
  uint64_t prev = 0;
  for (size_t i = 0; i < pc.points.size(); ++i) {
    const uint64_t k = morton_key(pc.points[i], pc.bit_depth);
    if (i > 0 && k <= prev) throw ConsistencyError("points not strictly Morton-increasing at " + std::to_string(i));
    prev = k;
    for (double c : pc.colors[i]) {
      if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
        throw RangeError("color of point " + std::to_string(i) + " outside [0,1]");
      }
    }
  }
}

PointCloud load_ply(const std::filesystem::path& path, int bit_depth) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("ply: cannot open " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw FormatError("ply: missing magic in " + path.string());

  bool ascii = false;
  std::vector<Element> elements;
  while (true) {
    if (!std::getline(in, line)) throw FormatError("ply: unterminated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        throw FormatError("ply: unsupported format '" + fmt + "'");
      }
    } else if (tok == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tok == "property") {
      if (elements.empty()) throw FormatError("ply: property before element");
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.type = parse_type(it);
      } else {
        p.type = parse_type(t);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }

  auto vit = std::find_if(elements.begin(), elements.end(), [](const Element& e) { return e.name == "vertex"; });
  if (vit == elements.end()) throw FormatError("ply: no vertex element");
  const char* wanted[6] = {"x", "y", "z", "red", "green", "blue"};
  int slot[6];
  for (int k = 0; k < 6; ++k) {
    auto it = std::find_if(vit->props.begin(), vit->props.end(),
                           [&](const Property& p) { return p.name == wanted[k]; });
    if (it == vit->props.end()) throw FormatError(std::string("ply: missing vertex property '") + wanted[k] + "'");
    if (it->is_list) throw FormatError(std::string("ply: list property '") + wanted[k] + "'");
    slot[k] = static_cast<int>(it - vit->props.begin());
  }
  for (auto e = elements.begin(); e != vit; ++e) {
    if (e->count == 0) continue;
    if (!ascii) {
      for (const auto& p : e->props) {
        if (p.is_list) throw FormatError("ply: list-valued element '" + e->name + "' precedes vertices");
      }
    }
  }

  std::vector<Vec3> pos(vit->count);
  std::vector<Vec3> col(vit->count);
  std::vector<double> values(vit->props.size());
  if (ascii) {
    for (auto e = elements.begin(); e != vit; ++e) {
      for (size_t i = 0; i < e->count; ++i) std::getline(in, line);
    }
    for (size_t i = 0; i < vit->count; ++i) {
      for (auto& v : values) {
        if (!(in >> v)) throw FormatError("ply: truncated vertex data at vertex " + std::to_string(i));
      }
      for (int a = 0; a < 3; ++a) {
        pos[i][a] = values[slot[a]];
        col[i][a] = to_unit_color(values[slot[3 + a]], vit->props[slot[3 + a]].type);
      }
    }
  } else {
    for (auto e = elements.begin(); e != vit; ++e) {
      size_t stride = 0;
      for (const auto& p : e->props) stride += type_size(p.type);
      in.seekg(static_cast<std::streamoff>(stride * e->count), std::ios::cur);
    }
    size_t stride = 0;
    std::vector<size_t> offset(vit->props.size());
    for (size_t k = 0; k < vit->props.size(); ++k) {
      if (vit->props[k].is_list) throw FormatError("ply: list property in binary vertex element");
      offset[k] = stride;
      stride += type_size(vit->props[k].type);
    }
    std::vector<char> buf(stride * vit->count);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(in.gcount()) != buf.size()) throw FormatError("ply: truncated binary vertex data");
    for (size_t i = 0; i < vit->count; ++i) {
      const char* row = buf.data() + i * stride;
      for (int a = 0; a < 3; ++a) {
        pos[i][a] = read_binary(row + offset[slot[a]], vit->props[slot[a]].type);
        const auto& cp = vit->props[slot[3 + a]];
        col[i][a] = to_unit_color(read_binary(row + offset[slot[3 + a]], cp.type), cp.type);
      }
    }
  }
  return voxelize(pos, col, bit_depth);
}

void save_ply(const std::filesystem::path& path, const PointCloud& pc, PlyEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("ply: cannot write " + path.string());
  const int coord_bytes = pc.bit_depth <= 8 ? 1 : pc.bit_depth <= 16 ? 2 : 4;
  const char* coord_type = coord_bytes == 1 ? "uchar" : coord_bytes == 2 ? "ushort" : "uint";
  out << "ply\nformat " << (encoding == PlyEncoding::kAscii ? "ascii" : "binary_little_endian") << " 1.0\n";
  out << "comment bit_depth " << pc.bit_depth << "\n";
  out << "element vertex " << pc.size() << "\n";
  for (const char* n : {"x", "y", "z"}) out << "property " << coord_type << " " << n << "\n";
  for (const char* n : {"red", "green", "blue"}) out << "property uchar " << n << "\n";
  out << "end_header\n";
  auto to_byte = [](double c) { return static_cast<uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); };
  for (size_t i = 0; i < pc.size(); ++i) {
    if (encoding == PlyEncoding::kAscii) {
      out << pc.points[i][0] << ' ' << pc.points[i][1] << ' ' << pc.points[i][2] << ' ' << int(to_byte(pc.colors[i][0]))
          << ' ' << int(to_byte(pc.colors[i][1])) << ' ' << int(to_byte(pc.colors[i][2])) << '\n';
    } else {
      for (int a = 0; a < 3; ++a) {
        const uint32_t v = static_cast<uint32_t>(pc.points[i][a]);
        out.write(reinterpret_cast<const char*>(&v), coord_bytes);
      }
      for (int a = 0; a < 3; ++a) {
        const uint8_t b = to_byte(pc.colors[i][a]);
        out.write(reinterpret_cast<const char*>(&b), 1);
      }
    }
  }
  if (!out) throw FormatError("ply: write failed for " + path.string());
}

}  // namespace b2p::voxel
