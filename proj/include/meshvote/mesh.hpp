#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "meshvote/bitmap.hpp"
#include "meshvote/geometry.hpp"

namespace meshvote {

using FaceId = std::uint32_t;
using Face = std::array<std::uint32_t, 3>;
using FaceUv = std::array<Vec2, 3>;

/// Triangle mesh with optional per-corner UVs and one RGB texture.
///
/// Invariants (checked by `validate`): face indices in range and pairwise distinct,
/// UVs present for every face when present at all, texture implies UVs, no face of
/// zero area.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Face>& faces() const noexcept { return faces_; }
  const std::vector<FaceUv>& uvs() const noexcept { return uvs_; }
  const std::optional<Bitmap>& texture() const noexcept { return texture_; }

  std::size_t face_count() const noexcept { return faces_.size(); }
  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  bool has_uvs() const noexcept { return !uvs_.empty(); }
  bool has_texture() const noexcept { return texture_.has_value(); }

  /// Attaches per-face corner UVs; length must equal the face count.
  void set_uvs(std::vector<FaceUv> uvs);
  /// Attaches an RGB texture; the mesh must already carry UVs.
  void set_texture(Bitmap texture);
  void clear_texture() noexcept { texture_.reset(); }

  std::array<Vec3, 3> triangle(std::size_t face) const {
    const Face& f = faces_[face];
    return {vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]};
  }
  double face_area(std::size_t face) const;
  Vec3 face_normal(std::size_t face) const;

  /// True when both meshes have the same face-vertex index lists and vertex count.
  bool same_topology(const Mesh& other) const noexcept;

  /// Throws DegenerateGeometry / PreconditionError when an invariant is broken.
  void validate() const;

  std::vector<Vec3>& mutable_vertices() noexcept { return vertices_; }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<FaceUv> uvs_;
  std::optional<Bitmap> texture_;
};

/// Edge-sharing face neighbourhoods, each list ascending.
class FaceAdjacency {
 public:
  FaceAdjacency() = default;
  explicit FaceAdjacency(std::vector<std::vector<FaceId>> neighbors, std::size_t non_manifold_edges = 0)
      : neighbors_(std::move(neighbors)), non_manifold_edges_(non_manifold_edges) {}

  std::span<const FaceId> neighbors(std::size_t face) const { return neighbors_[face]; }
  std::size_t face_count() const noexcept { return neighbors_.size(); }
  std::size_t non_manifold_edges() const noexcept { return non_manifold_edges_; }
  const std::vector<std::vector<FaceId>>& lists() const noexcept { return neighbors_; }

 private:
  std::vector<std::vector<FaceId>> neighbors_;
  std::size_t non_manifold_edges_ = 0;
};

/// Loads OBJ (v / vt / f) or PLY (ascii, binary little endian). Polygons are fan-split
/// from their first corner. Degenerate faces are dropped with a warning; a mesh with no
/// surviving face raises DegenerateGeometry. An optional PNG texture is attached when
/// the mesh carries UVs, otherwise MissingTexture is raised.
Mesh load_mesh(const std::filesystem::path& path,
               const std::optional<std::filesystem::path>& texture_path = std::nullopt);

/// Translates the bounding-box centre to the origin and scales so the farthest vertex
/// lies at distance 1.
Mesh normalize_mesh(const Mesh& mesh);

FaceAdjacency build_adjacency(const Mesh& mesh);

/// Writes a binary little-endian PLY with per-face RGB from `label_color`.
void export_labeled_mesh(const Mesh& mesh, std::span<const int> labels,
                         const std::filesystem::path& path);

/// Fixed 16-entry palette; label -1 (and any negative label) maps to neutral gray.
std::array<std::uint8_t, 3> label_color(int label) noexcept;

/// Reads per-face RGB colors back from a PLY written by `export_labeled_mesh`.
std::vector<std::array<std::uint8_t, 3>> read_face_colors(const std::filesystem::path& path);

}  // namespace meshvote
