#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "meshvote/bitmap.hpp"
#include "meshvote/mesh.hpp"

namespace meshvote {

/// Axis-aligned cube with corners at +-half_extent, 12 triangles.
Mesh make_cube(double half_extent = 1.0);

Mesh make_tetrahedron();

/// Unit icosphere; 20 * 4^subdivisions faces (3 -> 1280).
Mesh make_icosphere(int subdivisions);

/// Triangle soup of `face_count` random triangles inside the unit ball.
Mesh make_random_soup(int face_count, std::uint64_t seed);

/// Per-corner UVs from longitude/latitude of each vertex direction around +y.
std::vector<FaceUv> spherical_uvs(const Mesh& mesh);

/// RGB checkerboard, `cells` squares per side.
Bitmap checker_texture(int size, int cells = 8);

/// Labels faces whose centroid direction lies closest to `center` as 1 (about
/// `fraction` of all faces), others 0, then flips faces outvoted by
/// their edge neighbours (strict majority) until stable so the region boundary has no spikes.
std::vector<int> paint_cap(const Mesh& mesh, const Vec3& center, double fraction);

/// Writes v / vt / f records (1-based), including UVs when present.
void save_obj(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace meshvote
