#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "../support/temp_dir.hpp"
#include "meshvote/error.hpp"
#include "meshvote/image_io.hpp"
#include "meshvote/mesh.hpp"
#include "meshvote/primitives.hpp"

using namespace meshvote;

namespace {

/// Neighbours by checking every face pair for two shared vertices.
std::vector<std::vector<FaceId>> brute_force_neighbors(const Mesh& mesh) {
  std::vector<std::vector<FaceId>> out(mesh.face_count());
  for (std::size_t a = 0; a < mesh.face_count(); ++a) {
    for (std::size_t b = 0; b < mesh.face_count(); ++b) {
      if (a == b) continue;
      int shared = 0;
      for (auto va : mesh.faces()[a]) {
        for (auto vb : mesh.faces()[b]) shared += va == vb;
      }
      if (shared >= 2) out[a].push_back(static_cast<FaceId>(b));
    }
  }
  return out;
}

double max_radius(const Mesh& mesh) {
  double r = 0;
  for (const Vec3& v : mesh.vertices()) r = std::max(r, v.norm());
  return r;
}

}  // namespace

TEST_CASE("OBJ parsing handles polygons, negative indices and UVs") {
  testutil::TempDir dir;
  write_text_file(dir / "quad.obj",
                  "# quad split into two triangles\n"
                  "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                  "vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
                  "f 1/1 2/2 3/3 4/4\n"
                  "f -4/-4 -2/-2 -1/-1\n");
  const Mesh m = load_mesh(dir / "quad.obj");
  REQUIRE(m.face_count() == 3);
  CHECK(m.faces()[0] == Face{0, 1, 2});
  CHECK(m.faces()[1] == Face{0, 2, 3});
  CHECK(m.faces()[2] == Face{0, 2, 3});
  REQUIRE(m.has_uvs());
  CHECK(m.uvs()[1][2] == Vec2(0, 1));
}

TEST_CASE("OBJ errors carry the offending line") {
  testutil::TempDir dir;
  write_text_file(dir / "zero.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
  try {
    load_mesh(dir / "zero.obj");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("4") != std::string::npos);
  }
  write_text_file(dir / "range.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
  CHECK_THROWS_AS(load_mesh(dir / "range.obj"), ParseError);
  CHECK_THROWS_AS(load_mesh(dir / "missing.obj"), IoError);
  write_text_file(dir / "mesh.stl", "solid x\n");
  CHECK_THROWS_AS(load_mesh(dir / "mesh.stl"), UnsupportedFormat);
}

TEST_CASE("degenerate faces are dropped, all-degenerate meshes rejected") {
  testutil::TempDir dir;
  write_text_file(dir / "mixed.obj",
                  "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\n"
                  "f 1 2 3\nf 1 2 4\nf 1 1 3\n");
  CHECK(load_mesh(dir / "mixed.obj").face_count() == 1);
  write_text_file(dir / "flat.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS(load_mesh(dir / "flat.obj"), DegenerateGeometry);
}

TEST_CASE("texture needs UVs") {
  testutil::TempDir dir;
  save_obj(make_cube(1.0), dir / "cube.obj");
  write_png(checker_texture(16), dir / "tex.png");
  CHECK_THROWS_AS(load_mesh(dir / "cube.obj", dir / "tex.png"), MissingTexture);

  Mesh textured = make_icosphere(1);
  textured.set_uvs(spherical_uvs(textured));
  save_obj(textured, dir / "ball.obj");
  const Mesh loaded = load_mesh(dir / "ball.obj", dir / "tex.png");
  CHECK(loaded.has_texture());
  CHECK(loaded.same_topology(textured));
}

TEST_CASE("ASCII and binary PLY load the same mesh") {
  testutil::TempDir dir;
  write_text_file(dir / "a.ply",
                  "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
                  "property float z\nelement face 1\nproperty list uchar int vertex_indices\n"
                  "end_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  const Mesh a = load_mesh(dir / "a.ply");
  CHECK(a.face_count() == 2);

  const Mesh ball = normalize_mesh(make_icosphere(2));
  std::vector<int> labels(ball.face_count());
  for (std::size_t f = 0; f < labels.size(); ++f) labels[f] = static_cast<int>(f % 5) - 1;
  export_labeled_mesh(ball, labels, dir / "b.ply");
  const Mesh b = load_mesh(dir / "b.ply");
  REQUIRE(b.face_count() == ball.face_count());
  CHECK(b.faces() == ball.faces());
  for (std::size_t i = 0; i < b.vertex_count(); ++i) {
    CHECK((b.vertices()[i] - ball.vertices()[i]).norm() == doctest::Approx(0.0));
  }
  const auto colors = read_face_colors(dir / "b.ply");
  for (std::size_t f = 0; f < labels.size(); ++f) CHECK(colors[f] == label_color(labels[f]));
  CHECK(label_color(-1) == label_color(-7));
  CHECK(label_color(0) != label_color(1));

  const std::vector<int> short_labels(3, 0);
  CHECK_THROWS_AS(export_labeled_mesh(ball, short_labels, dir / "c.ply"), PreconditionError);

  write_text_file(dir / "be.ply",
                  "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(load_mesh(dir / "be.ply"), UnsupportedFormat);
}

TEST_CASE("normalization centres, scales to radius 1 and is idempotent") {
  Mesh m = make_random_soup(40, 5);
  for (Vec3& v : m.mutable_vertices()) v = v * 7.5 + Vec3(3, -2, 10);
  const Mesh n = normalize_mesh(m);
  CHECK(max_radius(n) == doctest::Approx(1.0).epsilon(1e-12));
  Vec3 lo = n.vertices()[0], hi = lo;
  for (const Vec3& v : n.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  CHECK(((lo + hi) / 2).norm() == doctest::Approx(0.0).epsilon(1e-12));
  const Mesh twice = normalize_mesh(n);
  CHECK(twice.face_count() == n.face_count());
  for (std::size_t i = 0; i < n.vertex_count(); ++i) {
    CHECK((twice.vertices()[i] - n.vertices()[i]).norm() < 1e-9);
  }
  Mesh point({Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)}, {Face{0, 1, 2}});
  CHECK_THROWS_AS(normalize_mesh(point), DegenerateGeometry);
  CHECK_THROWS_AS(normalize_mesh(Mesh{}), PreconditionError);
}

TEST_CASE("adjacency matches a brute-force shared-edge search") {
  for (const Mesh& mesh : {make_cube(1.0), make_icosphere(2), make_tetrahedron()}) {
    const FaceAdjacency adj = build_adjacency(mesh);
    const auto expected = brute_force_neighbors(mesh);
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
      const auto got = adj.neighbors(f);
      CHECK(std::vector<FaceId>(got.begin(), got.end()) == expected[f]);
    }
    CHECK(adj.non_manifold_edges() == 0);
  }
  // Closed triangle meshes give every face three neighbours.
  const FaceAdjacency ico = build_adjacency(make_icosphere(3));
  for (std::size_t f = 0; f < ico.face_count(); ++f) CHECK(ico.neighbors(f).size() == 3);

  // Three faces on one edge.
  Mesh fin({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)},
           {Face{0, 1, 2}, Face{0, 1, 3}, Face{0, 1, 4}});
  CHECK(build_adjacency(fin).non_manifold_edges() == 1);
}

TEST_CASE("painted caps have the requested size and no isolated faces") {
  const Mesh ball = normalize_mesh(make_icosphere(3));
  const auto labels = paint_cap(ball, Vec3(1, 0.2, 0), 0.15);
  const auto count = std::count(labels.begin(), labels.end(), 1);
  CHECK(count > 0.12 * 1280);
  CHECK(count < 0.18 * 1280);
  const FaceAdjacency adj = build_adjacency(ball);
  for (std::size_t f = 0; f < labels.size(); ++f) {
    int same = 0;
    for (FaceId n : adj.neighbors(f)) same += labels[n] == labels[f];
    CHECK(same * 2 >= 3);
  }
}
