#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "meshvote/error.hpp"
#include "meshvote/image_io.hpp"
#include "meshvote/mesh.hpp"

namespace meshvote {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view tok, const std::filesystem::path& path, std::size_t line) {
  // from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
    parse_fail(path, line, "invalid number '" + std::string(tok) + "'");
  }
  return value;
}

long parse_long(std::string_view tok, const std::filesystem::path& path, std::size_t line) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail(path, line, "invalid index '" + std::string(tok) + "'");
  }
  return value;
}

struct RawMesh {
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::uint32_t>> polygons;
  std::vector<std::vector<Vec2>> polygon_uvs;  // empty, or parallel to polygons
  std::vector<std::array<std::uint8_t, 3>> polygon_colors;
};

// ---------------------------------------------------------------- OBJ

RawMesh parse_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  RawMesh raw;
  std::vector<Vec2> texcoords;
  bool any_uv = false;
  bool missing_uv = false;
  std::string line;
  std::size_t line_no = 0;

  auto resolve = [&](long idx, std::size_t count, const char* what) -> std::uint32_t {
    if (idx == 0) parse_fail(path, line_no, std::string(what) + " index 0 (OBJ indices are 1-based)");
    const long resolved = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
    if (resolved < 0 || static_cast<std::size_t>(resolved) >= count) {
      parse_fail(path, line_no, std::string(what) + " index " + std::to_string(idx) + " out of range");
    }
    return static_cast<std::uint32_t>(resolved);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) parse_fail(path, line_no, "vertex record needs 3 coordinates");
      raw.vertices.emplace_back(parse_double(tok[1], path, line_no), parse_double(tok[2], path, line_no),
                                parse_double(tok[3], path, line_no));
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) parse_fail(path, line_no, "texcoord record needs 2 coordinates");
      texcoords.emplace_back(parse_double(tok[1], path, line_no), parse_double(tok[2], path, line_no));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) parse_fail(path, line_no, "face record needs at least 3 corners");
      std::vector<std::uint32_t> poly;
      std::vector<Vec2> uv;
      bool corner_uv = true;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const std::string_view corner = tok[i];
        const auto slash = corner.find('/');
        poly.push_back(resolve(parse_long(corner.substr(0, slash), path, line_no),
                               raw.vertices.size(), "vertex"));
        if (slash != std::string_view::npos) {
          auto rest = corner.substr(slash + 1);
          const auto slash2 = rest.find('/');
          auto vt = rest.substr(0, slash2);
          if (!vt.empty()) {
            uv.push_back(texcoords[resolve(parse_long(vt, path, line_no), texcoords.size(), "texcoord")]);
            continue;
          }
        }
        corner_uv = false;
      }
      if (corner_uv) {
        any_uv = true;
        raw.polygon_uvs.push_back(std::move(uv));
      } else {
        missing_uv = true;
        raw.polygon_uvs.emplace_back();
      }
      raw.polygons.push_back(std::move(poly));
    }
    // vn, o, g, s, usemtl, mtllib and unknown records are ignored.
  }
  if (!any_uv) {
    raw.polygon_uvs.clear();
  } else if (missing_uv) {
    spdlog::warn("{}: only some faces carry texture coordinates; uvs dropped", path.string());
    raw.polygon_uvs.clear();
  }
  return raw;
}

// ---------------------------------------------------------------- PLY

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType ply_type(std::string_view name, const std::filesystem::path& path, std::size_t line) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  parse_fail(path, line, "unknown PLY property type '" + std::string(name) + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double read_binary_value(std::istream& in, PlyType t, const std::filesystem::path& path) {
  char buf[8];
  if (!in.read(buf, static_cast<std::streamsize>(ply_size(t)))) {
    throw ParseError(path.string() + ": unexpected end of binary PLY data");
  }
  switch (t) {
    case PlyType::Int8: return load_as<std::int8_t>(buf);
    case PlyType::UInt8: return load_as<std::uint8_t>(buf);
    case PlyType::Int16: return load_as<std::int16_t>(buf);
    case PlyType::UInt16: return load_as<std::uint16_t>(buf);
    case PlyType::Int32: return load_as<std::int32_t>(buf);
    case PlyType::UInt32: return load_as<std::uint32_t>(buf);
    case PlyType::Float32: return load_as<float>(buf);
    case PlyType::Float64: return load_as<double>(buf);
  }
  return 0.0;
}

RawMesh parse_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<PlyElement> elements;
  bool binary = false;

  auto next_line = [&]() {
    if (!std::getline(in, line)) parse_fail(path, line_no, "truncated PLY header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  next_line();
  if (line != "ply") parse_fail(path, line_no, "missing 'ply' magic");
  for (;;) {
    next_line();
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) parse_fail(path, line_no, "bad format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        throw UnsupportedFormat(path.string() + ": PLY format '" + std::string(tok[1]) +
                                "' is not supported");
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(path, line_no, "bad element line");
      PlyElement el;
      el.name = std::string(tok[1]);
      el.count = static_cast<std::size_t>(parse_long(tok[2], path, line_no));
      elements.push_back(std::move(el));
    } else if (tok[0] == "property") {
      if (elements.empty()) parse_fail(path, line_no, "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        prop.is_list = true;
        prop.count_type = ply_type(tok[2], path, line_no);
        prop.type = ply_type(tok[3], path, line_no);
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        prop.type = ply_type(tok[1], path, line_no);
        prop.name = std::string(tok[2]);
      } else {
        parse_fail(path, line_no, "bad property line");
      }
      elements.back().properties.push_back(std::move(prop));
    } else {
      parse_fail(path, line_no, "unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }

  RawMesh raw;
  for (const PlyElement& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int ix = -1, iy = -1, iz = -1, iface = -1, ir = -1, ig = -1, ib = -1;
    for (int p = 0; p < static_cast<int>(el.properties.size()); ++p) {
      const auto& n = el.properties[p].name;
      if (n == "x") ix = p;
      if (n == "y") iy = p;
      if (n == "z") iz = p;
      if (n == "vertex_indices" || n == "vertex_index") iface = p;
      if (n == "red") ir = p;
      if (n == "green") ig = p;
      if (n == "blue") ib = p;
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      parse_fail(path, line_no, "vertex element lacks x/y/z");
    }
    if (is_face && iface < 0) parse_fail(path, line_no, "face element lacks vertex_indices");
    const bool colors = is_face && ir >= 0 && ig >= 0 && ib >= 0;

    std::vector<double> scalars(el.properties.size());
    std::vector<double> list;
    for (std::size_t i = 0; i < el.count; ++i) {
      std::vector<std::string_view> tok;
      std::size_t cursor = 0;
      if (!binary) {
        do {
          if (!std::getline(in, line)) parse_fail(path, line_no, "unexpected end of PLY data");
          ++line_no;
          tok = split_ws(line);
        } while (tok.empty());
      }
      auto next_value = [&](PlyType t) -> double {
        if (binary) return read_binary_value(in, t, path);
        if (cursor >= tok.size()) parse_fail(path, line_no, "too few values in element record");
        return parse_double(tok[cursor++], path, line_no);
      };
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const auto& prop = el.properties[p];
        if (prop.is_list) {
          const double n = next_value(prop.count_type);
          if (n < 0 || n != std::floor(n)) parse_fail(path, line_no, "bad list length");
          std::vector<double> values(static_cast<std::size_t>(n));
          for (auto& v : values) v = next_value(prop.type);
          if (static_cast<int>(p) == iface) list = std::move(values);
        } else {
          scalars[p] = next_value(prop.type);
        }
      }
      if (is_vertex) {
        raw.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
      } else if (is_face) {
        if (list.size() < 3) parse_fail(path, line_no, "face with fewer than 3 corners");
        std::vector<std::uint32_t> poly;
        for (double v : list) {
          if (v < 0 || v != std::floor(v)) parse_fail(path, line_no, "invalid vertex index");
          poly.push_back(static_cast<std::uint32_t>(v));
        }
        raw.polygons.push_back(std::move(poly));
        if (colors) {
          raw.polygon_colors.push_back({static_cast<std::uint8_t>(scalars[ir]),
                                        static_cast<std::uint8_t>(scalars[ig]),
                                        static_cast<std::uint8_t>(scalars[ib])});
        }
      }
    }
  }
  for (const auto& poly : raw.polygons) {
    for (auto v : poly) {
      if (v >= raw.vertices.size()) {
        throw ParseError(path.string() + ": face references vertex " + std::to_string(v) +
                         " beyond vertex count " + std::to_string(raw.vertices.size()));
      }
    }
  }
  return raw;
}

RawMesh parse_any(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("mesh file not found: " + path.string());
  const auto ext = lower(path.extension().string());
  if (ext == ".obj") return parse_obj(path);
  if (ext == ".ply") return parse_ply(path);
  throw UnsupportedFormat("unsupported mesh format '" + ext + "' (expected .obj or .ply)");
}

}  // namespace

Mesh load_mesh(const std::filesystem::path& path,
               const std::optional<std::filesystem::path>& texture_path) {
  RawMesh raw = parse_any(path);
  std::vector<Face> faces;
  std::vector<FaceUv> uvs;
  const bool with_uv = !raw.polygon_uvs.empty();
  std::size_t dropped = 0;
  for (std::size_t p = 0; p < raw.polygons.size(); ++p) {
    const auto& poly = raw.polygons[p];
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const Face f{poly[0], poly[k], poly[k + 1]};
      const Vec3& a = raw.vertices[f[0]];
      const Vec3& b = raw.vertices[f[1]];
      const Vec3& c = raw.vertices[f[2]];
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || !(0.5 * (b - a).cross(c - a).norm() > 0.0)) {
        ++dropped;
        continue;
      }
      faces.push_back(f);
      if (with_uv) {
        const auto& uv = raw.polygon_uvs[p];
        uvs.push_back({uv[0], uv[k], uv[k + 1]});
      }
    }
  }
  if (faces.empty()) {
    throw DegenerateGeometry(path.string() + ": mesh has no non-degenerate faces");
  }
  if (dropped > 0) spdlog::warn("{}: dropped {} degenerate faces", path.string(), dropped);

  Mesh mesh(std::move(raw.vertices), std::move(faces));
  if (with_uv) mesh.set_uvs(std::move(uvs));
  if (texture_path) {
    if (!mesh.has_uvs()) {
      throw MissingTexture(path.string() + ": texture given but mesh has no texture coordinates");
    }
    mesh.set_texture(read_png(*texture_path, 3));
  }
  return mesh;
}

void export_labeled_mesh(const Mesh& mesh, std::span<const int> labels,
                         const std::filesystem::path& path) {
  if (labels.size() != mesh.face_count()) {
    throw PreconditionError("label count " + std::to_string(labels.size()) +
                            " does not match face count " + std::to_string(mesh.face_count()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\ncomment per-face part labels\n"
      << "element vertex " << mesh.vertex_count() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.face_count() << "\n"
      << "property list uchar int vertex_indices\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  for (const Vec3& v : mesh.vertices()) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const std::uint8_t n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    for (auto v : mesh.faces()[f]) {
      const auto idx = static_cast<std::int32_t>(v);
      out.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
    }
    const auto rgb = label_color(labels[f]);
    out.write(reinterpret_cast<const char*>(rgb.data()), 3);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::array<std::uint8_t, 3>> read_face_colors(const std::filesystem::path& path) {
  RawMesh raw = parse_ply(path);
  if (raw.polygon_colors.size() != raw.polygons.size()) {
    throw ParseError(path.string() + ": faces carry no red/green/blue properties");
  }
  return raw.polygon_colors;
}

}  // namespace meshvote
