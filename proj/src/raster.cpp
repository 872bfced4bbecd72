#include "meshvote/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "meshvote/error.hpp"

namespace meshvote {
namespace {

struct ClipVertex {
  Vec3 cam;   // camera-space position
  Vec3 bary;  // barycentric coordinates in the source triangle
};

struct ScreenVertex {
  Vec2 pos;
  double depth;  // distance along the forward axis, > near
  Vec3 bary;
};

// Keeps the part of a convex polygon with depth >= near (Sutherland-Hodgman, one plane).
std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri) {
  std::vector<ClipVertex> out;
  out.reserve(4);
  for (std::size_t i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const double da = -a.cam.z() - kNearPlane;
    const double db = -b.cam.z() - kNearPlane;
    if (da >= 0.0) out.push_back(a);
    if ((da >= 0.0) != (db >= 0.0)) {
      const double t = da / (da - db);
      out.push_back({a.cam + t * (b.cam - a.cam), a.bary + t * (b.bary - a.bary)});
    }
  }
  return out;
}

// Edge function evaluated with a canonical vertex order so that a shared edge yields
// exactly opposite values for the two triangles using it.
double edge_function(const Vec2& a, const Vec2& b, const Vec2& p) {
  const bool swap = (b.x() < a.x()) || (b.x() == a.x() && b.y() < a.y());
  const Vec2& s = swap ? b : a;
  const Vec2& e = swap ? a : b;
  const double v = (e.x() - s.x()) * (p.y() - s.y()) - (e.y() - s.y()) * (p.x() - s.x());
  return swap ? -v : v;
}

// Top-left rule for positive-area triangles in y-down pixel space.
bool owns_edge(const Vec2& a, const Vec2& b) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

bool inside(double e, bool owned) { return e > 0.0 || (e == 0.0 && owned); }

struct Framebuffer {
  int width;
  int height;
  std::vector<double> depth;
  std::vector<std::uint32_t> face;
  std::vector<Vec3> bary;
};

void raster_triangle(Framebuffer& fb, FaceId face_id, ScreenVertex v0, ScreenVertex v1,
                     ScreenVertex v2) {
  double area = edge_function(v0.pos, v1.pos, v2.pos);
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) {
    std::swap(v1, v2);
    area = -area;
  }
  const double min_x = std::min({v0.pos.x(), v1.pos.x(), v2.pos.x()});
  const double max_x = std::max({v0.pos.x(), v1.pos.x(), v2.pos.x()});
  const double min_y = std::min({v0.pos.y(), v1.pos.y(), v2.pos.y()});
  const double max_y = std::max({v0.pos.y(), v1.pos.y(), v2.pos.y()});
  // Pixel (x, y) is sampled at its centre (x + 0.5, y + 0.5).
  const int x_begin = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
  const int x_end = std::min(fb.width - 1, static_cast<int>(std::floor(max_x - 0.5)));
  const int y_begin = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
  const int y_end = std::min(fb.height - 1, static_cast<int>(std::floor(max_y - 0.5)));
  if (x_begin > x_end || y_begin > y_end) return;

  const bool own12 = owns_edge(v1.pos, v2.pos);
  const bool own20 = owns_edge(v2.pos, v0.pos);
  const bool own01 = owns_edge(v0.pos, v1.pos);
  const double inv_area = 1.0 / area;

  for (int y = y_begin; y <= y_end; ++y) {
    for (int x = x_begin; x <= x_end; ++x) {
      const Vec2 p(x + 0.5, y + 0.5);
      const double e0 = edge_function(v1.pos, v2.pos, p);
      const double e1 = edge_function(v2.pos, v0.pos, p);
      const double e2 = edge_function(v0.pos, v1.pos, p);
      if (!inside(e0, own12) || !inside(e1, own20) || !inside(e2, own01)) continue;

      const double l0 = e0 * inv_area / v0.depth;
      const double l1 = e1 * inv_area / v1.depth;
      const double l2 = e2 * inv_area / v2.depth;
      const double inv_depth = l0 + l1 + l2;
      const double depth = 1.0 / inv_depth;
      const std::size_t idx = static_cast<std::size_t>(y) * fb.width + x;
      if (!(depth < fb.depth[idx])) continue;
      fb.depth[idx] = depth;
      fb.face[idx] = face_id;
      fb.bary[idx] = (l0 * v0.bary + l1 * v1.bary + l2 * v2.bary) * depth;
    }
  }
}

std::array<std::uint8_t, 3> sample_texture(const Bitmap& tex, const Vec2& uv) {
  const double u = std::clamp(uv.x(), 0.0, 1.0);
  const double v = std::clamp(uv.y(), 0.0, 1.0);
  const int tx = std::min(tex.width() - 1, static_cast<int>(u * tex.width()));
  const int ty = std::min(tex.height() - 1, static_cast<int>((1.0 - v) * tex.height()));
  return {tex.at(tx, ty, 0), tex.at(tx, ty, 1), tex.at(tx, ty, 2)};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

std::uint32_t RenderOutput::pixels_of(FaceId face) const noexcept {
  auto it = std::lower_bound(visible_faces.begin(), visible_faces.end(), face,
                             [](const VisibleFace& v, FaceId f) { return v.face < f; });
  return (it != visible_faces.end() && it->face == face) ? it->pixels : 0;
}

std::vector<VisibleFace> tally_visible_faces(const FaceIndexMap& map) {
  std::vector<std::uint32_t> ids(map.data().begin(), map.data().end());
  std::sort(ids.begin(), ids.end());
  std::vector<VisibleFace> out;
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    if (ids[i] != kBackgroundFace) {
      out.push_back({ids[i], static_cast<std::uint32_t>(j - i)});
    }
    i = j;
  }
  return out;
}

RenderOutput render(const Mesh& mesh, const Viewpoint& viewpoint, Shading shading,
                    const ShadingParams& params) {
  if (shading == Shading::Textured && !mesh.has_texture()) {
    throw MissingTexture("textured shading requested for a mesh without texture");
  }
  if (viewpoint.width <= 0 || viewpoint.height <= 0) {
    throw PreconditionError("viewpoint has no image size");
  }
  Framebuffer fb{viewpoint.width, viewpoint.height, {}, {}, {}};
  const std::size_t n_pixels = static_cast<std::size_t>(fb.width) * fb.height;
  fb.depth.assign(n_pixels, std::numeric_limits<double>::infinity());
  fb.face.assign(n_pixels, kBackgroundFace);
  fb.bary.assign(n_pixels, Vec3::Zero());

  std::vector<Vec3> cam(mesh.vertex_count());
  for (std::size_t i = 0; i < cam.size(); ++i) {
    cam[i] = (viewpoint.view * mesh.vertices()[i].homogeneous()).head<3>();
  }
  const double sx = 0.5 * fb.width * viewpoint.projection(0, 0);
  const double sy = 0.5 * fb.height * viewpoint.projection(1, 1);
  auto to_screen = [&](const ClipVertex& v) {
    const double depth = -v.cam.z();
    return ScreenVertex{Vec2(0.5 * fb.width + sx * v.cam.x() / depth,
                             0.5 * fb.height - sy * v.cam.y() / depth),
                        depth, v.bary};
  };

  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces()[f];
    const std::array<ClipVertex, 3> tri{{{cam[face[0]], Vec3::UnitX()},
                                         {cam[face[1]], Vec3::UnitY()},
                                         {cam[face[2]], Vec3::UnitZ()}}};
    const auto poly = clip_near(tri);
    if (poly.size() < 3) continue;
    const ScreenVertex first = to_screen(poly[0]);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      raster_triangle(fb, static_cast<FaceId>(f), first, to_screen(poly[k]), to_screen(poly[k + 1]));
    }
  }

  RenderOutput out;
  out.face_index_map = FaceIndexMap(fb.width, fb.height, 1, std::move(fb.face));
  out.visible_faces = tally_visible_faces(out.face_index_map);
  out.image = Bitmap(fb.width, fb.height, 3, params.background);

  // Flat headlight shading, two-sided since winding is not trusted.
  std::vector<double> light(mesh.face_count(), 0.0);
  for (const VisibleFace& vf : out.visible_faces) {
    const auto [a, b, c] = mesh.triangle(vf.face);
    const Vec3 to_camera = (viewpoint.position - (a + b + c) / 3.0).normalized();
    light[vf.face] = std::min(1.0, params.ambient + params.albedo * std::abs(mesh.face_normal(vf.face).dot(to_camera)));
  }
  for (int y = 0; y < fb.height; ++y) {
    for (int x = 0; x < fb.width; ++x) {
      const std::uint32_t f = out.face_index_map.at(x, y);
      if (f == kBackgroundFace) continue;
      if (shading == Shading::Untextured) {
        const auto g = to_byte(255.0 * light[f]);
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = g;
      } else {
        const Vec3& w = fb.bary[static_cast<std::size_t>(y) * fb.width + x];
        const FaceUv& uv = mesh.uvs()[f];
        const Vec2 st = w.x() * uv[0] + w.y() * uv[1] + w.z() * uv[2];
        const auto texel = sample_texture(*mesh.texture(), st);
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = to_byte(texel[c] * light[f]);
      }
    }
  }
  return out;
}

std::vector<FaceMaskFraction> faces_in_mask(const RenderOutput& render, const MaskImage& mask) {
  if (!mask.same_size(render.face_index_map) || mask.channels() != 1) {
    throw DimensionMismatch("mask is " + std::to_string(mask.width()) + "x" +
                            std::to_string(mask.height()) + ", render is " +
                            std::to_string(render.width()) + "x" + std::to_string(render.height()));
  }
  std::vector<FaceMaskFraction> out;
  out.reserve(render.visible_faces.size());
  for (const VisibleFace& vf : render.visible_faces) out.push_back({vf.face, vf.pixels, 0});
  auto ids = render.face_index_map.data();
  auto bits = mask.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kBackgroundFace || bits[i] == 0) continue;
    auto it = std::lower_bound(out.begin(), out.end(), ids[i],
                               [](const FaceMaskFraction& e, FaceId f) { return e.face < f; });
    ++it->masked_pixels;
  }
  return out;
}

MaskImage silhouette_mask(const RenderOutput& render) {
  MaskImage mask(render.width(), render.height(), 1);
  auto ids = render.face_index_map.data();
  auto bits = mask.data();
  for (std::size_t i = 0; i < ids.size(); ++i) bits[i] = ids[i] != kBackgroundFace;
  return mask;
}

PixelBox object_bbox(const RenderOutput& render) {
  auto box = mask_bounding_box(silhouette_mask(render));
  if (!box) throw EmptyRender("mesh covers no pixel in this view");
  return *box;
}

void write_face_index_map(const FaceIndexMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(map.width()),
                                   static_cast<std::uint32_t>(map.height()), 1u};
  out.write("FIDX", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(map.data().data()),
            static_cast<std::streamsize>(map.data().size_bytes()));
  if (!out) throw IoError("failed writing " + path.string());
}

FaceIndexMap read_face_index_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t header[3];
  if (!in.read(magic, 4) || std::memcmp(magic, "FIDX", 4) != 0) {
    throw ParseError(path.string() + ": missing FIDX magic");
  }
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw ParseError(path.string() + ": truncated FIDX header");
  }
  if (header[2] != 1u) throw UnsupportedFormat(path.string() + ": unknown FIDX version");
  const auto width = static_cast<int>(header[0]);
  const auto height = static_cast<int>(header[1]);
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(width) * height);
  if (!in.read(reinterpret_cast<char*>(ids.data()),
               static_cast<std::streamsize>(ids.size() * sizeof(std::uint32_t)))) {
    throw ParseError(path.string() + ": truncated FIDX payload");
  }
  return FaceIndexMap(width, height, 1, std::move(ids));
}

}  // namespace meshvote
