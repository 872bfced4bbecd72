#include "../support/stub_sidecar.hpp"

#include <doctest.h>

#include <sstream>

#include "../../tools/cli.hpp"
#include "../support/temp_dir.hpp"
#include "meshvote/eval.hpp"
#include "meshvote/image_io.hpp"
#include "meshvote/mesh.hpp"
#include "meshvote/primitives.hpp"
#include "meshvote/revote.hpp"

using namespace meshvote;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Ball mesh with a named two-part labeling written to disk.
struct Workspace {
  testutil::TempDir dir;
  std::string mesh = (dir / "ball.obj").string();
  std::string labels = (dir / "labels.json").string();
  std::vector<int> truth;

  Workspace() {
    const Mesh ball = normalize_mesh(make_icosphere(2));
    save_obj(ball, mesh);
    truth = paint_cap(ball, Vec3(1, 0.1, 0.2), 0.2);
    const auto top = paint_cap(ball, Vec3(-1, 0.1, -0.2), 0.2);
    for (std::size_t f = 0; f < truth.size(); ++f) {
      if (truth[f] == 0 && top[f] == 1) truth[f] = 2;
    }
    GroundTruth gt;
    gt.labels = truth;
    gt.label_names = {{0, "body"}, {1, "cap"}, {2, "knob"}};
    save_labels(gt, labels);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  std::vector<std::string> segment(const std::string& out) const {
    return {"segment", "--mesh", mesh, "--object", "ball", "--part", "cap", "--labels", labels,
            "--image-size", "64", "--out", out};
  }
};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("views prints the trajectory as CSV") {
  const Run r = run({"views"});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  std::string header;
  std::getline(lines, header);
  CHECK(header.rfind("k,theta_deg,phi_deg,x,y,z,view00", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 8);
  CHECK(r.out.find("\n4,115,0,") != std::string::npos);

  const Run odd = run({"views", "--k", "3"});
  CHECK(odd.code == cli::kInputError);
  CHECK(odd.err.find("ConfigError") != std::string::npos);
}

TEST_CASE("argument errors and help") {
  CHECK(run({}).code == cli::kInputError);
  CHECK(run({"frobnicate"}).code == cli::kInputError);
  CHECK(run({"views", "--bogus"}).code == cli::kInputError);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("segment") != std::string::npos);
  CHECK(run({"segment", "--part", "cap"}).code == cli::kInputError);
  CHECK(run({"segment", "--mesh", "/nonexistent.obj", "--part", "x", "--labels", "/n.json"}).code ==
        cli::kInputError);
}

TEST_CASE("segment with the oracle writes a report, mesh and per-view files") {
  Workspace ws;
  const std::string out = ws.path("run");
  const Run r = run(ws.segment(out));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const LoadedReport report = parse_report(read_text_file(out + "/report.json"));
  CHECK(report.target_label == 1);
  CHECK(report.view_count == 8);
  CHECK(report.o_smoothed.size() == ws.truth.size());
  for (FaceId f : report.member_faces) CHECK(ws.truth[f] == 1);

  const auto colors = read_face_colors(out + "/segmented.ply");
  for (std::size_t f = 0; f < colors.size(); ++f) {
    const bool member = std::binary_search(report.member_faces.begin(), report.member_faces.end(), f);
    CHECK(colors[f] == label_color(member ? 0 : -1));
  }
  for (const char* branch : {"untextured", "textured"}) {
    for (int k = 0; k < 8; ++k) {
      const fs::path v = fs::path(out) / branch / ("view_" + std::to_string(k));
      CHECK(fs::exists(v / "image.png"));
      CHECK(fs::exists(v / "fidx.bin"));
      CHECK(fs::exists(v / "detections.json"));
    }
  }

  const Run e = run({"eval", "--report", out + "/report.json", "--labels", ws.labels, "--visible-only"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto reports = parse_eval_csv(read_text_file(out + "/eval.csv"));
  REQUIRE(reports.size() == 1);
  // Low resolution: smoothing may drop a few thinly seen boundary faces, never add wrong ones.
  CHECK(reports[0].miou > 0.9);
  CHECK(reports[0].category == "ball");
  CHECK(fs::exists(out + "/eval.json"));
}

TEST_CASE("recorded runs replay through the files backend byte for byte") {
  Workspace ws;
  const std::string live = ws.path("live");
  REQUIRE(run(ws.segment(live) + std::vector<std::string>{"--corrupt", "complement:random2", "--seed", "3"})
              .code == 0);
  const std::string replay = ws.path("replay");
  const Run r = run({"segment", "--mesh", ws.mesh, "--object", "ball", "--part", "cap", "--image-size",
                     "64", "--backend", "files", "--files-dir", live, "--out", replay, "--seed", "3",
                     "--target-label", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_text_file(live + "/report.json") == read_text_file(replay + "/report.json"));

  const Run missing = run({"segment", "--mesh", ws.mesh, "--part", "cap", "--backend", "files",
                           "--files-dir", ws.path("nothing"), "--out", ws.path("x")});
  CHECK(missing.code == cli::kBackendError);
}

TEST_CASE("same seed gives byte-identical reports; corruption changes them") {
  Workspace ws;
  const std::vector<std::string> extra{"--corrupt", "complement:random1", "--seed", "11"};
  REQUIRE(run(ws.segment(ws.path("a")) + extra).code == 0);
  REQUIRE(run(ws.segment(ws.path("b")) + extra + std::vector<std::string>{"--threads", "1"}).code == 0);
  CHECK(read_text_file(ws.path("a/report.json")) == read_text_file(ws.path("b/report.json")));
  REQUIRE(run(ws.segment(ws.path("c"))).code == 0);
  CHECK(read_text_file(ws.path("a/report.json")) != read_text_file(ws.path("c/report.json")));
}

TEST_CASE("config files fill options that flags do not set") {
  Workspace ws;
  write_text_file(ws.path("run.cfg"),
                  "# trajectory\nk = 4\nimage-size=48\nthetas = 60 120\nmethod=baseline\n");
  const Run r = run(ws.segment(ws.path("cfg")) + std::vector<std::string>{"--config", ws.path("run.cfg")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(read_text_file(ws.path("cfg/report.json")));
  CHECK(j["K"] == 4);
  CHECK(j["method"] == "baseline");
  // --image-size 64 on the command line wins over the file's 48.
  CHECK(read_png(ws.path("cfg/untextured/view_0/image.png"), 3).width() == 64);

  write_text_file(ws.path("bad.cfg"), "colour = red\n");
  CHECK(run(ws.segment(ws.path("bad")) + std::vector<std::string>{"--config", ws.path("bad.cfg")}).code ==
        cli::kInputError);
}

TEST_CASE("multi-query runs assign each face to one part") {
  Workspace ws;
  const std::string out = ws.path("multi");
  const Run r = run({"segment", "--mesh", ws.mesh, "--object", "ball", "--part", "cap", "--part", "knob",
                     "--labels", ws.labels, "--image-size", "64", "--out", out});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(out + "/queries/0_cap/report.json"));
  CHECK(fs::exists(out + "/queries/1_knob/report.json"));
  const auto j = nlohmann::json::parse(read_text_file(out + "/assignment.json"));
  const auto labels = j["labels"].get<std::vector<int>>();
  REQUIRE(labels.size() == ws.truth.size());
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (labels[f] == 0) CHECK(ws.truth[f] == 1);
    if (labels[f] == 1) CHECK(ws.truth[f] == 2);
  }
  const Run e = run({"eval", "--assignment", out + "/assignment.json", "--labels", ws.labels,
                     "--visible-only", "--category", "toy"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto reports = parse_eval_csv(read_text_file(out + "/eval.csv"));
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].parts.size() == 2);
  CHECK(reports[0].miou > 0.9);

  CHECK(run({"segment", "--mesh", ws.mesh, "--part", "cap", "--part", "wheel", "--labels", ws.labels,
             "--out", ws.path("bad")})
            .code == cli::kInputError);
}

TEST_CASE("render writes every view") {
  Workspace ws;
  const Run r = run({"render", "--mesh", ws.mesh, "--image-size", "32", "--k", "4", "--out", ws.path("r")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (int k = 0; k < 4; ++k) {
    CHECK(fs::exists(ws.path("r/untextured/view_" + std::to_string(k) + "/image.png")));
  }
  CHECK_FALSE(fs::exists(ws.path("r/textured")));
}

TEST_CASE("segment against a sidecar over HTTP") {
  Workspace ws;
  stub::Sidecar sidecar;
  const Run r = run({"segment", "--mesh", ws.mesh, "--part", "cap", "--backend", "http", "--http-url",
                     sidecar.url(), "--image-size", "48", "--out", ws.path("http")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(sidecar.detect_calls == 8);  // untextured branch only: no texture given
  CHECK(fs::exists(ws.path("http/untextured/view_0/mask.png")));

  int port = 0;
  {
    stub::Sidecar gone;
    port = gone.port;
  }
  const Run down = run({"segment", "--mesh", ws.mesh, "--part", "cap", "--backend", "http", "--http-url",
                        "http://127.0.0.1:" + std::to_string(port), "--out", ws.path("down")});
  CHECK(down.code == cli::kBackendError);
}
