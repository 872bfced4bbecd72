#include "meshvote/mesh.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "meshvote/error.hpp"

namespace meshvote {

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {}

void Mesh::set_uvs(std::vector<FaceUv> uvs) {
  if (!uvs.empty() && uvs.size() != faces_.size()) {
    throw LengthMismatch("uv list must have one entry per face");
  }
  uvs_ = std::move(uvs);
  if (uvs_.empty()) texture_.reset();
}

void Mesh::set_texture(Bitmap texture) {
  if (!has_uvs()) throw MissingTexture("cannot attach a texture to a mesh without uvs");
  if (texture.channels() != 3 || texture.empty()) {
    throw PreconditionError("texture must be a non-empty RGB bitmap");
  }
  texture_ = std::move(texture);
}

double Mesh::face_area(std::size_t face) const {
  const auto [a, b, c] = triangle(face);
  return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 Mesh::face_normal(std::size_t face) const {
  const auto [a, b, c] = triangle(face);
  const Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

bool Mesh::same_topology(const Mesh& other) const noexcept {
  return vertices_.size() == other.vertices_.size() && faces_ == other.faces_;
}

void Mesh::validate() const {
  const auto n = static_cast<std::uint32_t>(vertices_.size());
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    const Face& f = faces_[i];
    for (auto v : f) {
      if (v >= n) throw PreconditionError("face " + std::to_string(i) + " references a missing vertex");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw DegenerateGeometry("face " + std::to_string(i) + " repeats a vertex");
    }
    if (!(face_area(i) > 1e-12)) {
      throw DegenerateGeometry("face " + std::to_string(i) + " has zero area");
    }
  }
  if (!uvs_.empty() && uvs_.size() != faces_.size()) {
    throw PreconditionError("uv count does not match face count");
  }
  if (texture_ && uvs_.empty()) throw MissingTexture("texture present without uvs");
}

Mesh normalize_mesh(const Mesh& mesh) {
  if (mesh.vertex_count() == 0 || mesh.face_count() == 0) {
    throw PreconditionError("cannot normalize an empty mesh");
  }
  Vec3 lo = mesh.vertices().front();
  Vec3 hi = lo;
  for (const Vec3& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 center = 0.5 * (lo + hi);
  double radius = 0.0;
  for (const Vec3& v : mesh.vertices()) radius = std::max(radius, (v - center).norm());
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw DegenerateGeometry("all vertices coincide; mesh cannot be normalized");
  }
  Mesh out = mesh;
  for (Vec3& v : out.mutable_vertices()) v = (v - center) / radius;
  return out;
}

FaceAdjacency build_adjacency(const Mesh& mesh) {
  // Undirected edge -> incident faces.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<FaceId>> edges;
  const auto& faces = mesh.faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int e = 0; e < 3; ++e) {
      auto a = faces[f][e];
      auto b = faces[f][(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edges[{a, b}].push_back(static_cast<FaceId>(f));
    }
  }
  std::vector<std::vector<FaceId>> neighbors(faces.size());
  std::size_t non_manifold = 0;
  for (const auto& [edge, incident] : edges) {
    if (incident.size() > 2) ++non_manifold;
    for (FaceId a : incident) {
      for (FaceId b : incident) {
        if (a != b) neighbors[a].push_back(b);
      }
    }
  }
  for (auto& list : neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  if (non_manifold > 0) {
    spdlog::warn("mesh has {} non-manifold edges; adjacency includes every incident face",
                 non_manifold);
  }
  return FaceAdjacency(std::move(neighbors), non_manifold);
}

std::array<std::uint8_t, 3> label_color(int label) noexcept {
  static constexpr std::array<std::array<std::uint8_t, 3>, 16> kPalette{{
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
      {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {0, 0, 128},
  }};
  if (label < 0) return {160, 160, 160};
  return kPalette[static_cast<std::size_t>(label) % kPalette.size()];
}

}  // namespace meshvote
