#include "meshvote/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "meshvote/error.hpp"

namespace meshvote {

Mesh make_cube(double h) {
  std::vector<Vec3> v{{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                      {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
  std::vector<Face> f{{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                      {3, 7, 6}, {3, 6, 2}, {0, 4, 7}, {0, 7, 3}, {1, 2, 6}, {1, 6, 5}};
  return Mesh(std::move(v), std::move(f));
}

Mesh make_tetrahedron() {
  std::vector<Vec3> v{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  for (auto& p : v) p /= std::sqrt(3.0);
  return Mesh(std::move(v), {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

Mesh make_icosphere(int subdivisions) {
  if (subdivisions < 0) throw PreconditionError("subdivision level must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint.try_emplace({key.first, key.second}, 0u);
      if (inserted) {
        v.push_back((v[a] + v[b]).normalized());
        it->second = static_cast<std::uint32_t>(v.size() - 1);
      }
      return it->second;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& tri : f) {
      const auto ab = mid(tri[0], tri[1]);
      const auto bc = mid(tri[1], tri[2]);
      const auto ca = mid(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  return Mesh(std::move(v), std::move(f));
}

Mesh make_random_soup(int face_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto in_ball = [&] {
    for (;;) {
      Vec3 p(2 * uniform() - 1, 2 * uniform() - 1, 2 * uniform() - 1);
      if (p.norm() <= 1.0) return p;
    }
  };
  std::vector<Vec3> v;
  std::vector<Face> f;
  while (static_cast<int>(f.size()) < face_count) {
    // Small-ish triangles around a random centre so the soup has real occlusion.
    const Vec3 c = 0.6 * in_ball();
    const Vec3 a = c + 0.4 * in_ball();
    const Vec3 b = c + 0.4 * in_ball();
    const Vec3 d = c + 0.4 * in_ball();
    if ((b - a).cross(d - a).norm() < 1e-3) continue;
    const auto base = static_cast<std::uint32_t>(v.size());
    v.insert(v.end(), {a, b, d});
    f.push_back({base, base + 1, base + 2});
  }
  return Mesh(std::move(v), std::move(f));
}

std::vector<FaceUv> spherical_uvs(const Mesh& mesh) {
  std::vector<FaceUv> uvs;
  uvs.reserve(mesh.face_count());
  for (const Face& f : mesh.faces()) {
    FaceUv uv;
    for (int k = 0; k < 3; ++k) {
      const Vec3 d = mesh.vertices()[f[k]].normalized();
      const double lon = std::atan2(d.z(), d.x());
      const double lat = std::asin(std::clamp(d.y(), -1.0, 1.0));
      uv[k] = Vec2(0.5 + lon / (2 * std::numbers::pi), 0.5 + lat / std::numbers::pi);
    }
    uvs.push_back(uv);
  }
  return uvs;
}

Bitmap checker_texture(int size, int cells) {
  Bitmap tex(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool odd = ((x * cells / size) + (y * cells / size)) % 2 == 1;
      tex.at(x, y, 0) = odd ? 200 : 90;
      tex.at(x, y, 1) = odd ? 120 : 160;
      tex.at(x, y, 2) = odd ? 60 : 220;
    }
  }
  return tex;
}

std::vector<int> paint_cap(const Mesh& mesh, const Vec3& center, double fraction) {
  const std::size_t m = mesh.face_count();
  const Vec3 dir = center.normalized();
  std::vector<double> angle(m);
  for (std::size_t f = 0; f < m; ++f) {
    const auto [a, b, c] = mesh.triangle(f);
    angle[f] = std::acos(std::clamp(((a + b + c) / 3.0).normalized().dot(dir), -1.0, 1.0));
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return angle[x] < angle[y]; });
  const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(m)));
  std::vector<int> labels(m, 0);
  for (std::size_t i = 0; i < std::min(count, m); ++i) labels[order[i]] = 1;

  const FaceAdjacency adj = build_adjacency(mesh);
  // Each flip strictly lowers the number of disagreeing edges, so this terminates.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t f = 0; f < m; ++f) {
      int disagree = 0;
      for (FaceId n : adj.neighbors(f)) disagree += labels[n] != labels[f];
      if (2 * disagree > static_cast<int>(adj.neighbors(f).size())) {
        labels[f] = 1 - labels[f];
        changed = true;
      }
    }
  }
  return labels;
}

void save_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  if (mesh.has_uvs()) {
    for (const FaceUv& uv : mesh.uvs()) {
      for (const Vec2& t : uv) out << "vt " << t.x() << ' ' << t.y() << '\n';
    }
  }
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces()[f];
    out << 'f';
    for (int k = 0; k < 3; ++k) {
      out << ' ' << face[k] + 1;
      if (mesh.has_uvs()) out << '/' << 3 * f + k + 1;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace meshvote
