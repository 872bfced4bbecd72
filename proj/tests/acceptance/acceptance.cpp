// Acceptance suite: prints one PASS/FAIL line per criterion, exits non-zero on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../../tools/cli.hpp"
#include "../support/oracles.hpp"
#include "meshvote/camera.hpp"
#include "meshvote/eval.hpp"
#include "meshvote/image_io.hpp"
#include "meshvote/primitives.hpp"
#include "meshvote/raster.hpp"
#include "meshvote/revote.hpp"

using namespace meshvote;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

/// Unit icosphere with a textured copy and a painted cap.
struct CapScene {
  Mesh untextured;
  Mesh textured;
  FaceAdjacency adjacency;
  std::vector<int> labels;
};

CapScene cap_scene(const Vec3& center) {
  CapScene s;
  s.untextured = normalize_mesh(make_icosphere(3));
  s.textured = s.untextured;
  s.textured.set_uvs(spherical_uvs(s.textured));
  s.textured.set_texture(checker_texture(128));
  s.adjacency = build_adjacency(s.untextured);
  s.labels = paint_cap(s.untextured, center, 0.15);
  return s;
}

/// Cap centre within 40 degrees of the equator, drawn from `seed`.
Vec3 random_cap_center(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  std::uniform_real_distribution<double> lat(-40.0, 40.0), lon(0.0, 360.0);
  const double a = lat(rng) * std::numbers::pi / 180, b = lon(rng) * std::numbers::pi / 180;
  return Vec3(std::cos(a) * std::cos(b), std::sin(a), std::cos(a) * std::sin(b));
}

TrajectoryConfig trajectory(int size) {
  TrajectoryConfig t;
  t.image_size = size;
  return t;
}

OracleConfig oracle_for(const CapScene& s, std::uint64_t seed, const std::string& corruption) {
  OracleConfig o;
  o.gt_labels = s.labels;
  o.target_label = 1;
  o.seed = seed;
  o.corruptions.push_back(parse_corruption(corruption));
  return o.resolved(8);
}

const QuerySpec kQuery{"ball", "cap"};

void clean_oracle_exactness() {
  const CapScene s = cap_scene(Vec3(0.8, 0.25, 0.55));
  OracleBackend backend(oracle_for(s, 0, "none"));
  VoteOptions options;
  options.threads = 1;
  const auto start = std::chrono::steady_clock::now();
  const SegmentationResult r =
      segment_mesh(s.untextured, &s.textured, kQuery, trajectory(256), backend, options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto truth = oracle::truth_visible(s.labels, 1, r.visible_faces);
  const double miou = oracle::visible_iou(r.member_faces, s.labels, 1, r.visible_faces);
  std::size_t cap = 0;
  for (int l : s.labels) cap += l == 1;
  const bool ok = r.member_faces == truth && miou == 1.0 && seconds < 10.0;
  report("clean-oracle-exactness", ok,
         fmt("faces=%zu cap=%zu members=%zu truth_visible=%zu miou=%.6f time=%.2fs",
             s.untextured.face_count(), cap, r.member_faces.size(), truth.size(), miou, seconds));
}

void error_correction() {
  int not_worse = 0, strictly_better = 0, miou_ok = 0;
  double min_miou = 1.0, mean_gain = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CapScene s = cap_scene(random_cap_center(seed));
    OracleBackend backend(oracle_for(s, seed, "complement:random1"));
    const SegmentationResult revoted =
        segment_mesh(s.untextured, &s.textured, kQuery, trajectory(256), backend);
    const SegmentationResult baseline =
        baseline_segment(s.untextured, &s.textured, kQuery, trajectory(256), backend);
    const double acc_r = oracle::face_accuracy(revoted.member_faces, s.labels, 1);
    const double acc_b = oracle::face_accuracy(baseline.member_faces, s.labels, 1);
    const double miou = oracle::visible_iou(revoted.member_faces, s.labels, 1, revoted.visible_faces);
    not_worse += acc_r >= acc_b;
    strictly_better += acc_r > acc_b;
    miou_ok += miou >= 0.95;
    min_miou = std::min(min_miou, miou);
    mean_gain += (acc_r - acc_b) / 20.0;
  }
  report("error-correction", not_worse == 20 && strictly_better >= 15 && miou_ok == 20,
         fmt("acc>=baseline %d/20, acc>baseline %d/20, miou>=0.95 %d/20 (min %.4f), mean gain %.4f",
             not_worse, strictly_better, miou_ok, min_miou, mean_gain));
}

void dual_branch_gain() {
  int ok = 0;
  double min_gap = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CapScene s = cap_scene(random_cap_center(seed + 100));
    OracleBackend backend(oracle_for(s, seed, "complement:random3"), oracle_for(s, seed, "none"));
    const SegmentationResult fused =
        segment_mesh(s.untextured, &s.textured, kQuery, trajectory(256), backend);
    const SegmentationResult single =
        segment_mesh(s.untextured, nullptr, kQuery, trajectory(256), backend);
    const double m_fused = oracle::visible_iou(fused.member_faces, s.labels, 1, fused.visible_faces);
    const double m_single = oracle::visible_iou(single.member_faces, s.labels, 1, single.visible_faces);
    ok += m_fused >= m_single;
    min_gap = std::min(min_gap, m_fused - m_single);
  }
  report("dual-branch-gain", ok == 20, fmt("fused>=untextured-only %d/20, min gap %.4f", ok, min_gap));
}

void accumulate_equivalence() {
  std::mt19937_64 rng(2024);
  constexpr std::size_t kFaces = 200;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int views = 1 + static_cast<int>(rng() % 16);
    std::vector<ViewVote> votes;
    for (int v = 0; v < views; ++v) {
      ViewVote vote;
      vote.view = v;
      vote.confidence = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      for (FaceId f = 0; f < kFaces; ++f) {
        const auto r = rng() % 3;
        if (r == 0) vote.masked_faces.push_back(f);
        if (r == 1) vote.visible_unmasked_faces.push_back(f);
      }
      votes.push_back(std::move(vote));
    }
    const auto fast = accumulate(votes, kFaces);
    const auto slow = oracle::naive_accumulate(votes, kFaces);
    for (std::size_t f = 0; f < kFaces; ++f) worst = std::max(worst, std::abs(fast[f] - slow[f]));
  }
  report("accumulate-equivalence", worst <= 1e-9, fmt("1000 vote sets, max |diff| = %.3g", worst));
}

void rasterizer_vs_raycast() {
  const std::vector<std::pair<const char*, Mesh>> meshes = {
      {"cube", normalize_mesh(make_cube(1.0))},
      {"icosphere", normalize_mesh(make_icosphere(3))},
      {"random50", normalize_mesh(make_random_soup(50, 7))},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [name, mesh] : meshes) {
    long total = 0, agree = 0, far = 0;
    for (const Viewpoint& vp : generate_trajectory(trajectory(64))) {
      const RenderOutput r = render(mesh, vp, Shading::Untextured);
      const auto cam = oracle::PinholeCamera::orbit(vp.radius, vp.theta_deg, vp.phi_deg, 70.0, 64);
      const auto ids = oracle::ray_cast(mesh, cam);
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          ++total;
          if (r.face_index_map.at(x, y) == ids[static_cast<std::size_t>(y) * 64 + x]) {
            ++agree;
          } else if (oracle::distance_to_edges(mesh, cam, x, y) > 1.0) {
            ++far;
          }
        }
      }
    }
    const double rate = static_cast<double>(agree) / total;
    ok = ok && rate >= 0.995 && far == 0;
    detail += fmt("%s %.5f (%ld off-edge)  ", name, rate, far);
  }
  report("rasterizer-vs-raycast", ok, detail);
}

void trajectory_positions() {
  const auto views = generate_trajectory(trajectory(256));
  double worst = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const double theta = (i < 4 ? 75.0 : 115.0) * std::numbers::pi / 180;
    const double phi = static_cast<double>(i % 4) * 90.0 * std::numbers::pi / 180;
    const Vec3 expected(2 * std::sin(theta) * std::cos(phi), 2 * std::cos(theta),
                        2 * std::sin(theta) * std::sin(phi));
    worst = std::max(worst, (views[i].position - expected).cwiseAbs().maxCoeff());
  }
  report("trajectory", views.size() == 8 && worst <= 1e-6,
         fmt("%zu views, max |diff| = %.3g", views.size(), worst));
}

bool smoothing_bounded(std::mt19937_64& rng) {
  const Mesh mesh = normalize_mesh(make_icosphere(2));
  const FaceAdjacency adj = build_adjacency(mesh);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> o(mesh.face_count());
    for (double& v : o) v = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
    const auto s = smooth(o, adj);
    const auto [lo, hi] = std::minmax_element(o.begin(), o.end());
    for (double v : s) {
      if (v < *lo || v > *hi) return false;
    }
  }
  return true;
}

bool threshold_strict() {
  const std::vector<double> o{0.0, -0.0, 1e-300, -1e-300, 0.5, -0.5};
  return threshold(o, 0.0) == std::vector<FaceId>{2, 4};
}

bool confidence_scaling(std::mt19937_64& rng) {
  const CapScene s = cap_scene(Vec3(1, 0, 0));
  for (double conf : {0.05, 0.3, 0.9, 3.0}) {
    OracleConfig o = oracle_for(s, 5, "complement:random1");
    OracleConfig base = o;
    o.confidence_correct = o.confidence_corrupt = conf;
    OracleBackend scaled(o), reference(base);
    const auto a = segment_mesh(s.untextured, &s.textured, kQuery, trajectory(128), scaled);
    const auto b = segment_mesh(s.untextured, &s.textured, kQuery, trajectory(128), reference);
    if (a.member_faces != b.member_faces) return false;
  }
  (void)rng;
  return true;
}

bool whole_object_filter(std::mt19937_64& rng) {
  const Mesh mesh = normalize_mesh(make_icosphere(2));
  const RenderOutput r = render(mesh, generate_trajectory(trajectory(64)).front(), Shading::Untextured);
  const PixelBox object = object_bbox(r);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 4; ++i) {
      auto coord = [&](double lo, double hi) {
        return std::round(std::uniform_real_distribution<double>(lo, hi)(rng));
      };
      PixelBox b{coord(object.x0 - 3, object.x0 + 6), coord(object.y0 - 3, object.y0 + 6), 0, 0};
      b.x1 = coord(std::max(b.x0 + 1, object.x1 - 6), object.x1 + 3);
      b.y1 = coord(std::max(b.y0 + 1, object.y1 - 6), object.y1 + 3);
      if (i % 2) b = PixelBox{b.x0 + 10, b.y0 + 10, b.x1 - 5, b.y1 - 5};
      dets.push_back(Detection{b, 0.5});
    }
    const auto kept = filter_detections(dets, r, 0.9);
    std::vector<Detection> expected;
    for (const auto& d : dets) {
      if (oracle::pixel_count_iou(d.box, object, 64, 64) < 0.9) expected.push_back(d);
    }
    if (kept != expected) return false;
  }
  return true;
}

bool deterministic_reports() {
  const fs::path dir = fs::temp_directory_path() / "meshvote_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const CapScene s = cap_scene(Vec3(0.3, 0.2, 1.0));
  save_obj(s.untextured, dir / "ball.obj");
  GroundTruth gt;
  gt.labels = s.labels;
  gt.label_names = {{0, "body"}, {1, "cap"}};
  save_labels(gt, dir / "labels.json");
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = dir / ("run" + std::to_string(i));
    std::ostringstream o, e;
    const int code = cli::run({"segment", "--mesh", (dir / "ball.obj").string(), "--object", "ball",
                               "--part", "cap", "--labels", (dir / "labels.json").string(),
                               "--corrupt", "complement:random2", "--seed", "42", "--image-size",
                               "128", "--out", out.string()},
                              o, e);
    if (code != 0) return false;
    reports[i] = read_text_file(out / "report.json");
  }
  fs::remove_all(dir);
  return !reports[0].empty() && reports[0] == reports[1];
}

void invariants() {
  std::mt19937_64 rng(99);
  const bool a = smoothing_bounded(rng);
  const bool b = threshold_strict();
  const bool c = confidence_scaling(rng);
  const bool d = whole_object_filter(rng);
  const bool e = deterministic_reports();
  report("invariants", a && b && c && d && e,
         fmt("smooth-bounded=%d threshold-strict=%d conf-scaling=%d whole-object-filter=%d "
             "byte-identical-report=%d", a, b, c, d, e));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
      {"clean-oracle-exactness", clean_oracle_exactness},
      {"error-correction", error_correction},
      {"dual-branch-gain", dual_branch_gain},
      {"accumulate-equivalence", accumulate_equivalence},
      {"rasterizer-vs-raycast", rasterizer_vs_raycast},
      {"trajectory", trajectory_positions},
      {"invariants", invariants},
  };
  // With arguments, run only the named criteria.
  int ran = 0;
  for (const auto& [name, fn] : criteria) {
    bool selected = argc == 1;
    for (int i = 1; i < argc; ++i) selected = selected || name == argv[i];
    if (selected) {
      fn();
      ++ran;
    }
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion\n");
    return 2;
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
