#include "cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "meshvote/backend.hpp"
#include "meshvote/camera.hpp"
#include "meshvote/error.hpp"
#include "meshvote/eval.hpp"
#include "meshvote/image_io.hpp"
#include "meshvote/mesh.hpp"
#include "meshvote/primitives.hpp"
#include "meshvote/raster.hpp"
#include "meshvote/revote.hpp"

namespace meshvote::cli {
namespace {

namespace fs = std::filesystem;

/// Flags shared by the subcommands, mirroring the run configuration.
struct RunConfig {
  std::string mesh;
  std::string textured_mesh;
  std::string texture;
  std::string object_text = "object";
  std::vector<std::string> parts;

  int k = 8;
  double radius = 2.0;
  std::vector<double> thetas{75.0, 115.0};
  int image_size = 512;
  double fov = 70.0;
  std::string up_axis = "y";

  std::string backend = "oracle";
  std::string labels;
  std::optional<int> target_label;
  std::vector<std::string> corrupt;
  std::vector<std::string> corrupt_untextured;
  std::vector<std::string> corrupt_textured;
  double conf_correct = 0.9;
  double conf_corrupt = 0.9;
  std::string files_dir;
  std::string http_url = "http://127.0.0.1:8731";
  double http_timeout = 30.0;
  int http_max_inflight = 4;

  std::string out = "run";
  double iou_cutoff = 0.90;
  double membership_fraction = 0.5;
  unsigned min_pixels = 2;
  double o_threshold = 0.0;
  std::string multi_box = "top1";
  std::string method = "revote";
  bool single_branch = false;
  std::uint64_t seed = 0;
  int threads = 0;

  // eval
  std::vector<std::string> reports;
  std::string assignment;
  bool visible_only = false;
  bool area_weighted = false;
  std::string category;
};

std::string slug(const std::string& text) {
  std::string s;
  for (unsigned char c : text) s += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
  return s;
}

UpAxis parse_up(const std::string& s) {
  if (s == "x") return UpAxis::X;
  if (s == "y") return UpAxis::Y;
  if (s == "z") return UpAxis::Z;
  throw ConfigError("--up-axis must be x, y or z");
}

TrajectoryConfig trajectory_of(const RunConfig& c) {
  TrajectoryConfig t;
  t.view_count = c.k;
  t.radius = c.radius;
  t.polar_angles_deg = c.thetas;
  t.image_size = c.image_size;
  t.fov_y_deg = c.fov;
  t.up_axis = parse_up(c.up_axis);
  t.validate();
  return t;
}

VoteOptions vote_options_of(const RunConfig& c) {
  VoteOptions o;
  o.iou_cutoff = c.iou_cutoff;
  o.membership_fraction = c.membership_fraction;
  o.min_pixels = c.min_pixels;
  o.o_threshold = c.o_threshold;
  if (c.multi_box == "top1") {
    o.multi_box = MultiBox::Top1;
  } else if (c.multi_box == "union") {
    o.multi_box = MultiBox::Union;
  } else {
    throw ConfigError("--multi-box must be top1 or union");
  }
  o.threads = c.threads;
  return o;
}

void add_trajectory_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--k", c.k, "Number of views (even)");
  sub->add_option("--radius", c.radius, "Camera distance from the origin");
  sub->add_option("--thetas", c.thetas, "Polar angles of the camera rings, degrees");
  sub->add_option("--image-size", c.image_size, "Square render size in pixels");
  sub->add_option("--fov", c.fov, "Vertical field of view, degrees");
  sub->add_option("--up-axis", c.up_axis, "Polar axis: x, y or z");
}

void add_mesh_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--mesh", c.mesh, "Mesh file (OBJ or PLY)");
  sub->add_option("--textured-mesh", c.textured_mesh, "Textured mesh with UVs (same faces as --mesh)");
  sub->add_option("--texture", c.texture, "RGB PNG texture for the textured branch");
}

/// Applies `key=value` lines to options not given on the command line.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt || key == "config") {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    std::vector<std::string> values;
    std::istringstream ss(value);
    for (std::string v; ss >> v;) values.push_back(v);
    if (values.empty()) continue;
    opt->add_result(values);
    opt->run_callback();
  }
}

struct LoadedMeshes {
  Mesh untextured;
  std::optional<Mesh> textured;
};

LoadedMeshes load_meshes(const RunConfig& c, bool synthesize_texture) {
  if (c.mesh.empty()) throw ConfigError("--mesh is required");
  LoadedMeshes m;
  const std::optional<fs::path> texture =
      c.texture.empty() ? std::nullopt : std::optional<fs::path>(c.texture);
  if (!c.textured_mesh.empty()) {
    if (!texture) throw MissingTexture("--textured-mesh needs --texture");
    m.untextured = normalize_mesh(load_mesh(c.mesh));
    m.textured = normalize_mesh(load_mesh(c.textured_mesh, texture));
  } else if (texture) {
    m.untextured = normalize_mesh(load_mesh(c.mesh, texture));
    m.textured = m.untextured;
    m.untextured.clear_texture();
  } else {
    m.untextured = normalize_mesh(load_mesh(c.mesh));
    if (synthesize_texture) {
      Mesh tex = m.untextured;
      tex.set_uvs(spherical_uvs(tex));
      tex.set_texture(checker_texture(256));
      m.textured = std::move(tex);
    }
  }
  if (m.textured && !m.untextured.same_topology(*m.textured)) {
    throw TopologyMismatch("--textured-mesh must share the faces of --mesh");
  }
  return m;
}

// ---------------------------------------------------------------- views

int cmd_views(const RunConfig& c, const std::string& out_path, std::ostream& out) {
  const auto views = generate_trajectory(trajectory_of(c));
  std::ostringstream os;
  os << std::setprecision(10);
  os << "k,theta_deg,phi_deg,x,y,z";
  for (const char* m : {"view", "proj"}) {
    for (int i = 0; i < 16; ++i) os << ',' << m << i / 4 << i % 4;
  }
  os << '\n';
  for (const Viewpoint& v : views) {
    os << v.index << ',' << v.theta_deg << ',' << v.phi_deg << ',' << v.position.x() << ','
       << v.position.y() << ',' << v.position.z();
    for (const Mat4* m : {&v.view, &v.projection}) {
      for (int i = 0; i < 16; ++i) os << ',' << (*m)(i / 4, i % 4) + 0.0;
    }
    os << '\n';
  }
  if (out_path.empty()) {
    out << os.str();
  } else {
    write_text_file(out_path, os.str());
  }
  return kSuccess;
}

// ---------------------------------------------------------------- render

int cmd_render(const RunConfig& c, std::ostream& out) {
  const LoadedMeshes meshes = load_meshes(c, false);
  const auto views = generate_trajectory(trajectory_of(c));
  int written = 0;
  auto emit = [&](const Mesh& mesh, Branch branch, Shading shading) {
    for (const Viewpoint& vp : views) {
      const RenderOutput r = render(mesh, vp, shading);
      const auto dir = view_directory(c.out, branch, vp.index);
      fs::create_directories(dir);
      write_png(r.image, dir / "image.png");
      write_face_index_map(r.face_index_map, dir / "fidx.bin");
      ++written;
    }
  };
  emit(meshes.untextured, Branch::Untextured, Shading::Untextured);
  if (meshes.textured) emit(*meshes.textured, Branch::Textured, Shading::Textured);
  out << "rendered " << written << " views into " << c.out << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- segment

OracleConfig oracle_config(const RunConfig& c, const GroundTruth& gt, int target,
                           const std::vector<std::string>& branch_corruptions) {
  OracleConfig o;
  o.gt_labels = gt.labels;
  o.target_label = target;
  o.confidence_correct = c.conf_correct;
  o.confidence_corrupt = c.conf_corrupt;
  o.seed = c.seed;
  for (const auto& s : c.corrupt) o.corruptions.push_back(parse_corruption(s));
  for (const auto& s : branch_corruptions) o.corruptions.push_back(parse_corruption(s));
  return o.resolved(c.k);
}

int cmd_segment(const RunConfig& c, std::ostream& out) {
  if (c.parts.empty()) throw ConfigError("at least one --part is required");
  if (c.backend != "oracle" && c.backend != "files" && c.backend != "http") {
    throw ConfigError("--backend must be oracle, files or http");
  }
  if (c.method != "revote" && c.method != "baseline") {
    throw ConfigError("--method must be revote or baseline");
  }
  const TrajectoryConfig trajectory = trajectory_of(c);
  const VoteOptions options = vote_options_of(c);
  if (c.backend == "files" && c.files_dir.empty()) throw ConfigError("--files-dir is required");
  const bool oracle = c.backend == "oracle";
  // Neither the oracle nor replayed files read pixels, so a procedural texture can
  // stand in for a missing one and keep the textured branch.
  const bool synthesize = oracle || (c.backend == "files" && fs::is_directory(fs::path(c.files_dir) /
                                                                              branch_name(Branch::Textured)));
  LoadedMeshes meshes = load_meshes(c, synthesize && !c.single_branch);
  if (c.single_branch) meshes.textured.reset();
  const std::size_t m = meshes.untextured.face_count();

  std::optional<GroundTruth> gt;
  if (!c.labels.empty()) gt = load_labels(c.labels, m);
  if (oracle && !gt) throw ConfigError("the oracle backend needs --labels");

  std::unique_ptr<HttpBackend> http;
  if (c.backend == "http") {
    auto opts = HttpBackendOptions::from_url(c.http_url);
    opts.timeout_seconds = c.http_timeout;
    opts.max_in_flight = c.http_max_inflight;
    http = std::make_unique<HttpBackend>(opts);
    http->health();
  }

  const fs::path out_dir = c.out;
  fs::create_directories(out_dir);
  const FaceAdjacency adjacency = build_adjacency(meshes.untextured);
  const bool multi = c.parts.size() > 1;

  std::vector<SegmentationResult> results;
  std::vector<std::optional<int>> targets;
  for (std::size_t qi = 0; qi < c.parts.size(); ++qi) {
    const QuerySpec query = QuerySpec{c.object_text, c.parts[qi]}.normalized();
    std::optional<int> target;
    if (!multi && c.target_label) {
      target = c.target_label;
    } else if (gt) {
      target = gt->find_label(query.grounding_text);
    }
    if (oracle && !target) {
      if (multi || gt->label_names.size() > 0) {
        throw UnknownLabel("no ground-truth part named '" + query.grounding_text + "'");
      }
      throw ConfigError("--target-label is required when labels carry no names");
    }
    const fs::path query_dir =
        multi ? out_dir / "queries" / (std::to_string(qi) + "_" + slug(query.grounding_text)) : out_dir;

    std::unique_ptr<GroundingBackend> owned;
    GroundingBackend* backend = nullptr;
    if (oracle) {
      owned = std::make_unique<OracleBackend>(oracle_config(c, *gt, *target, c.corrupt_untextured),
                                              oracle_config(c, *gt, *target, c.corrupt_textured));
      backend = owned.get();
    } else if (c.backend == "files") {
      const fs::path root = multi ? fs::path(c.files_dir) / "queries" / query_dir.filename()
                                  : fs::path(c.files_dir);
      owned = std::make_unique<FileBackend>(root);
      backend = owned.get();
    } else {
      backend = http.get();
    }

    std::error_code ec;
    const bool same_dir = c.backend == "files" && fs::equivalent(c.files_dir, out_dir, ec);
    std::optional<RecordingBackend> recorder;
    if (!same_dir) recorder.emplace(*backend, query_dir);
    GroundingBackend& active = recorder ? static_cast<GroundingBackend&>(*recorder) : *backend;

    const Mesh* textured = meshes.textured ? &*meshes.textured : nullptr;
    const ViewVotes votes = collect_votes(meshes.untextured, textured, query, trajectory, active, options);
    SegmentationResult result = c.method == "baseline"
                                    ? baseline_union(votes, m, query)
                                    : revote(votes, m, adjacency, query, options);
    fs::create_directories(query_dir);
    write_text_file(query_dir / "report.json",
                    report_json(result, ReportMeta{c.seed, target, c.method}));
    out << query.grounding_text << ": " << result.member_faces.size() << " of " << m
        << " faces, " << result.diagnostics.views_used << " voting views\n";
    results.push_back(std::move(result));
    targets.push_back(target);
  }

  std::vector<int> labels(m, -1);
  if (multi) {
    labels = assign_multi(results);
    nlohmann::ordered_json j;
    j["object"] = c.object_text;
    j["parts"] = c.parts;
    nlohmann::ordered_json tl = nlohmann::ordered_json::array();
    for (const auto& t : targets) tl.push_back(t ? nlohmann::ordered_json(*t) : nullptr);
    j["target_labels"] = tl;
    j["seed"] = c.seed;
    j["labels"] = labels;
    std::vector<FaceId> visible;
    for (const auto& r : results) visible.insert(visible.end(), r.visible_faces.begin(), r.visible_faces.end());
    std::sort(visible.begin(), visible.end());
    visible.erase(std::unique(visible.begin(), visible.end()), visible.end());
    j["visible_faces"] = visible;
    write_text_file(out_dir / "assignment.json", j.dump(2) + "\n");
  } else {
    for (FaceId f : results.front().member_faces) labels[f] = 0;
  }
  export_labeled_mesh(meshes.untextured, labels, out_dir / "segmented.ply");
  return kSuccess;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const RunConfig& c, std::ostream& out) {
  if (c.labels.empty()) throw ConfigError("--labels is required");
  if (c.reports.empty() == c.assignment.empty()) {
    throw ConfigError("give either --report (repeatable) or --assignment");
  }
  const GroundTruth gt = load_labels(c.labels);
  std::vector<double> areas;
  if (c.area_weighted) {
    if (c.mesh.empty()) throw ConfigError("--area-weighted needs --mesh");
    const Mesh mesh = normalize_mesh(load_mesh(c.mesh));
    if (mesh.face_count() != gt.labels.size()) throw LengthMismatch("mesh and labels differ in face count");
    for (std::size_t f = 0; f < mesh.face_count(); ++f) areas.push_back(mesh.face_area(f));
  }
  auto options_for = [&](std::vector<FaceId> visible) {
    EvalOptions o;
    o.visible_only = c.visible_only;
    o.visible_faces = std::move(visible);
    o.area_weighted = c.area_weighted;
    o.face_areas = areas;
    return o;
  };

  std::vector<EvalReport> reports;
  fs::path first_input;
  if (!c.assignment.empty()) {
    first_input = c.assignment;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(c.assignment));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("assignment: ") + e.what());
    }
    const auto assigned = j.at("labels").get<std::vector<int>>();
    const auto parts = j.at("parts").get<std::vector<std::string>>();
    std::vector<int> query_labels;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& t = j.contains("target_labels") ? j["target_labels"][i] : nlohmann::json();
      query_labels.push_back(t.is_null() ? resolve_label(gt, parts[i]) : t.get<int>());
    }
    EvalReport r = evaluate_assignment(assigned, query_labels, gt,
                                       options_for(j.value("visible_faces", std::vector<FaceId>{})));
    r.category = c.category.empty() ? j.value("object", std::string("object")) : c.category;
    reports.push_back(std::move(r));
  } else {
    first_input = c.reports.front();
    for (const auto& path : c.reports) {
      const LoadedReport lr = parse_report(read_text_file(path));
      if (lr.o_smoothed.size() != gt.labels.size()) {
        throw LengthMismatch(path + ": report covers " + std::to_string(lr.o_smoothed.size()) +
                             " faces, labels " + std::to_string(gt.labels.size()));
      }
      SegmentationResult sr;
      sr.query = lr.query;
      sr.member_faces = lr.member_faces;
      sr.scores.o_smoothed = lr.o_smoothed;
      const std::optional<int> target = c.target_label ? c.target_label : lr.target_label;
      EvalReport r = evaluate(sr, gt, options_for(lr.visible_faces), target);
      r.category = c.category.empty() ? lr.query.object_text : c.category;
      reports.push_back(std::move(r));
    }
  }

  const fs::path out_dir = c.out.empty() || c.out == "run" ? first_input.parent_path() : fs::path(c.out);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  write_text_file(out_dir / "eval.csv", eval_csv(reports));
  write_text_file(out_dir / "eval.json", eval_json(reports));
  out << std::setprecision(6);
  for (const EvalReport& r : reports) {
    for (const PartIou& p : r.parts) out << r.category << " " << p.part << " iou=" << p.iou << "\n";
    out << r.category << " miou=" << r.miou << "\n";
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot mesh part segmentation by multi-view confidence revoting", "meshvote"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  RunConfig c;
  std::string config_file;
  std::string views_out;
  bool verbose = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value file; flags override it");
    sub->add_flag("-v,--verbose", verbose, "Log progress to stderr");
  };

  auto* views = app.add_subcommand("views", "Print the camera trajectory");
  add_trajectory_options(views, c);
  views->add_option("--out", views_out, "Write the listing to a file instead of stdout");
  common(views);

  auto* render_cmd = app.add_subcommand("render", "Render every view to PNG + FIDX files");
  add_mesh_options(render_cmd, c);
  add_trajectory_options(render_cmd, c);
  render_cmd->add_option("--out", c.out, "Run directory");
  common(render_cmd);

  auto* segment = app.add_subcommand("segment", "Segment a mesh region named by text");
  add_mesh_options(segment, c);
  add_trajectory_options(segment, c);
  segment->add_option("--object", c.object_text, "Object class text");
  segment->add_option("--part", c.parts, "Grounding text; repeat for multiple queries");
  segment->add_option("--backend", c.backend, "oracle, files or http");
  segment->add_option("--labels", c.labels, "Per-face ground-truth labels (oracle)");
  segment->add_option("--target-label", c.target_label, "Oracle target label id");
  segment->add_option("--corrupt", c.corrupt, "Oracle corruption for both branches");
  segment->add_option("--corrupt-untextured", c.corrupt_untextured, "Oracle corruption, untextured branch");
  segment->add_option("--corrupt-textured", c.corrupt_textured, "Oracle corruption, textured branch");
  segment->add_option("--conf-correct", c.conf_correct, "Oracle confidence on clean views");
  segment->add_option("--conf-corrupt", c.conf_corrupt, "Oracle confidence on corrupted views");
  segment->add_option("--files-dir", c.files_dir, "Recorded run directory (files backend)");
  segment->add_option("--http-url", c.http_url, "Sidecar URL (http backend)");
  segment->add_option("--http-timeout", c.http_timeout, "Per-request timeout, seconds");
  segment->add_option("--http-max-inflight", c.http_max_inflight, "Concurrent sidecar requests");
  segment->add_option("--out", c.out, "Run directory");
  segment->add_option("--iou-cutoff", c.iou_cutoff, "Whole-object detection IoU cutoff");
  segment->add_option("--membership-fraction", c.membership_fraction, "Masked pixel share for membership");
  segment->add_option("--min-pixels", c.min_pixels, "Visible pixels needed to vote");
  segment->add_option("--o-threshold", c.o_threshold, "Membership threshold on smoothed scores");
  segment->add_option("--multi-box", c.multi_box, "top1 or union");
  segment->add_option("--method", c.method, "revote or baseline");
  segment->add_flag("--single-branch", c.single_branch, "Skip the textured branch");
  segment->add_option("--seed", c.seed, "Seed for randomized oracle corruption");
  segment->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  common(segment);

  auto* eval = app.add_subcommand("eval", "Score reports against ground-truth labels");
  eval->add_option("--report", c.reports, "report.json (repeatable)");
  eval->add_option("--assignment", c.assignment, "assignment.json from a multi-query run");
  eval->add_option("--labels", c.labels, "Per-face ground-truth labels");
  eval->add_option("--target-label", c.target_label, "Truth label id overriding the report");
  eval->add_option("--mesh", c.mesh, "Mesh for --area-weighted");
  eval->add_flag("--visible-only", c.visible_only, "Ignore faces no view saw");
  eval->add_flag("--area-weighted", c.area_weighted, "Weight faces by area");
  eval->add_option("--category", c.category, "Category name for the report rows");
  eval->add_option("--out", c.out, "Output directory (default: next to the first input)");
  common(eval);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_file.empty()) apply_config_file(sub, config_file);
    if (sub == views) return cmd_views(c, views_out, out);
    if (sub == render_cmd) return cmd_render(c, out);
    if (sub == segment) return cmd_segment(c, out);
    return cmd_eval(c, out);
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return e.is_backend_error() ? kBackendError : kInputError;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace meshvote::cli
