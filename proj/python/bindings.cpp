#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "../tools/cli.hpp"
#include "meshvote/backend.hpp"
#include "meshvote/camera.hpp"
#include "meshvote/error.hpp"
#include "meshvote/eval.hpp"
#include "meshvote/mesh.hpp"
#include "meshvote/primitives.hpp"
#include "meshvote/raster.hpp"
#include "meshvote/revote.hpp"

namespace py = pybind11;
using namespace meshvote;

namespace {

template <class T>
py::array_t<T> image_array(const Image<T>& image) {
  std::vector<py::ssize_t> shape{image.height(), image.width()};
  if (image.channels() > 1) shape.push_back(image.channels());
  py::array_t<T> out(shape);
  std::copy(image.data().begin(), image.data().end(), out.mutable_data());
  return out;
}

MaskImage mask_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionMismatch("mask must be a 2-D array");
  MaskImage mask(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 1);
  const auto* src = a.data();
  auto dst = mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] != 0;
  return mask;
}

Mesh mesh_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& vertices,
                      const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& faces) {
  if (vertices.ndim() != 2 || vertices.shape(1) != 3) throw PreconditionError("vertices must be (n, 3)");
  if (faces.ndim() != 2 || faces.shape(1) != 3) throw PreconditionError("faces must be (m, 3)");
  std::vector<Vec3> v(static_cast<std::size_t>(vertices.shape(0)));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = Vec3(vertices.at(i, 0), vertices.at(i, 1), vertices.at(i, 2));
  std::vector<Face> f(static_cast<std::size_t>(faces.shape(0)));
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const auto id = faces.at(i, k);
      if (id < 0) throw PreconditionError("face indices must be non-negative");
      f[i][k] = static_cast<std::uint32_t>(id);
    }
  }
  Mesh mesh(std::move(v), std::move(f));
  mesh.validate();
  return mesh;
}

py::dict view_dict(const ViewContext& view) {
  py::dict d;
  d["branch"] = view.branch;
  d["view"] = view.view;
  d["image"] = image_array(view.render.image);
  d["face_index_map"] = image_array(view.render.face_index_map);
  return d;
}

/// Lets Python classes implement `detect(view, query)` / `segment(view, box)`, where
/// `view` is a dict of branch, view index, RGB image and face-index map.
class PyBackend : public GroundingBackend {
 public:
  std::vector<Detection> detect(const ViewContext& view, const QuerySpec& query) override {
    py::gil_scoped_acquire gil;
    return sort_detections(call("detect", view_dict(view), query).cast<std::vector<Detection>>());
  }
  MaskImage segment(const ViewContext& view, const PixelBox& box) override {
    py::gil_scoped_acquire gil;
    return mask_from_array(call("segment", view_dict(view), box));
  }

 private:
  template <class... Args>
  py::object call(const char* name, Args&&... args) {
    py::function fn = py::get_override(static_cast<const GroundingBackend*>(this), name);
    if (!fn) throw PreconditionError(std::string("backend does not implement ") + name);
    return fn(std::forward<Args>(args)...);
  }
};

}  // namespace

PYBIND11_MODULE(_meshvote, m) {
  m.doc() = "Zero-shot mesh part segmentation by multi-view face confidence revoting";

  py::register_exception<Error>(m, "MeshvoteError", PyExc_RuntimeError);

  py::class_<Mesh>(m, "Mesh")
      .def(py::init(&mesh_from_arrays), py::arg("vertices"), py::arg("faces"))
      .def_property_readonly("face_count", &Mesh::face_count)
      .def_property_readonly("vertex_count", &Mesh::vertex_count)
      .def_property_readonly("has_texture", &Mesh::has_texture)
      .def_property_readonly("vertices",
                             [](const Mesh& mesh) {
                               py::array_t<double> a({static_cast<py::ssize_t>(mesh.vertex_count()), py::ssize_t{3}});
                               auto r = a.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
                                 for (int k = 0; k < 3; ++k) r(i, k) = mesh.vertices()[i][k];
                               }
                               return a;
                             })
      .def_property_readonly("faces",
                             [](const Mesh& mesh) {
                               py::array_t<std::uint32_t> a({static_cast<py::ssize_t>(mesh.face_count()), py::ssize_t{3}});
                               auto r = a.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < mesh.face_count(); ++i) {
                                 for (int k = 0; k < 3; ++k) r(i, k) = mesh.faces()[i][k];
                               }
                               return a;
                             })
      .def("face_area", &Mesh::face_area)
      .def("with_checker_texture",
           [](const Mesh& mesh, int size) {
             Mesh out = mesh;
             out.set_uvs(spherical_uvs(out));
             out.set_texture(checker_texture(size));
             return out;
           },
           py::arg("size") = 256, "Copy with spherical UVs and a checkerboard texture.");

  m.def("load_mesh", &load_mesh, py::arg("path"), py::arg("texture") = py::none());
  m.def("normalize_mesh", &normalize_mesh);
  m.def("save_obj", &save_obj);
  m.def("make_cube", &make_cube, py::arg("half_extent") = 1.0);
  m.def("make_icosphere", &make_icosphere, py::arg("subdivisions"));
  m.def("make_random_soup", &make_random_soup, py::arg("face_count"), py::arg("seed"));
  m.def("paint_cap",
        [](const Mesh& mesh, std::array<double, 3> c, double fraction) {
          return paint_cap(mesh, Vec3(c[0], c[1], c[2]), fraction);
        },
        py::arg("mesh"), py::arg("center"), py::arg("fraction"));
  m.def("face_neighbors", [](const Mesh& mesh) { return build_adjacency(mesh).lists(); });

  py::enum_<UpAxis>(m, "UpAxis").value("X", UpAxis::X).value("Y", UpAxis::Y).value("Z", UpAxis::Z);
  py::class_<TrajectoryConfig>(m, "TrajectoryConfig")
      .def(py::init<>())
      .def_readwrite("view_count", &TrajectoryConfig::view_count)
      .def_readwrite("radius", &TrajectoryConfig::radius)
      .def_readwrite("polar_angles_deg", &TrajectoryConfig::polar_angles_deg)
      .def_readwrite("image_size", &TrajectoryConfig::image_size)
      .def_readwrite("fov_y_deg", &TrajectoryConfig::fov_y_deg)
      .def_readwrite("up_axis", &TrajectoryConfig::up_axis)
      .def("validate", &TrajectoryConfig::validate);

  py::class_<Viewpoint>(m, "Viewpoint")
      .def_readonly("index", &Viewpoint::index)
      .def_readonly("theta_deg", &Viewpoint::theta_deg)
      .def_readonly("phi_deg", &Viewpoint::phi_deg)
      .def_property_readonly("position",
                             [](const Viewpoint& v) {
                               return std::array<double, 3>{v.position.x(), v.position.y(), v.position.z()};
                             })
      .def_property_readonly("view", [](const Viewpoint& v) {
        py::array_t<double> a({4, 4});
        auto r = a.mutable_unchecked<2>();
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) r(i, j) = v.view(i, j);
        }
        return a;
      });
  m.def("generate_trajectory", &generate_trajectory, py::arg("config") = TrajectoryConfig{});

  py::enum_<Shading>(m, "Shading").value("UNTEXTURED", Shading::Untextured).value("TEXTURED", Shading::Textured);
  py::class_<RenderOutput>(m, "RenderOutput")
      .def_property_readonly("image", [](const RenderOutput& r) { return image_array(r.image); })
      .def_property_readonly("face_index_map", [](const RenderOutput& r) { return image_array(r.face_index_map); })
      .def_property_readonly("visible_faces", [](const RenderOutput& r) {
        std::vector<FaceId> ids;
        for (const auto& vf : r.visible_faces) ids.push_back(vf.face);
        return ids;
      });
  m.def("render",
        [](const Mesh& mesh, const Viewpoint& vp, Shading shading) { return render(mesh, vp, shading); },
        py::arg("mesh"), py::arg("viewpoint"), py::arg("shading") = Shading::Untextured,
        py::call_guard<py::gil_scoped_release>());
  m.attr("BACKGROUND_FACE") = kBackgroundFace;

  py::class_<QuerySpec>(m, "QuerySpec")
      .def(py::init([](std::string o, std::string g) { return QuerySpec{std::move(o), std::move(g)}; }),
           py::arg("object_text"), py::arg("grounding_text"))
      .def_readonly("object_text", &QuerySpec::object_text)
      .def_readonly("grounding_text", &QuerySpec::grounding_text);
  py::class_<PixelBox>(m, "PixelBox")
      .def(py::init([](double x0, double y0, double x1, double y1) { return PixelBox{x0, y0, x1, y1}; }))
      .def_readonly("x0", &PixelBox::x0)
      .def_readonly("y0", &PixelBox::y0)
      .def_readonly("x1", &PixelBox::x1)
      .def_readonly("y1", &PixelBox::y1)
      .def("__iter__", [](const PixelBox& b) {
        return py::iter(py::make_tuple(b.x0, b.y0, b.x1, b.y1));
      });
  py::class_<Detection>(m, "Detection")
      .def(py::init([](PixelBox box, double c) { return Detection{box, c}; }), py::arg("box"), py::arg("confidence"))
      .def_readonly("box", &Detection::box)
      .def_readonly("confidence", &Detection::confidence);
  py::enum_<Branch>(m, "Branch").value("UNTEXTURED", Branch::Untextured).value("TEXTURED", Branch::Textured);
  py::class_<GroundingBackend, PyBackend>(m, "GroundingBackend")
      .def(py::init<>());

  py::class_<OracleConfig>(m, "OracleConfig")
      .def(py::init([](std::vector<int> labels, int target, std::vector<std::string> corruptions,
                       double conf_correct, double conf_corrupt, std::uint64_t seed, int view_count) {
             OracleConfig c;
             c.gt_labels = std::move(labels);
             c.target_label = target;
             for (const auto& s : corruptions) c.corruptions.push_back(parse_corruption(s));
             c.confidence_correct = conf_correct;
             c.confidence_corrupt = conf_corrupt;
             c.seed = seed;
             return c.resolved(view_count);
           }),
           py::arg("gt_labels"), py::arg("target_label"), py::arg("corruptions") = std::vector<std::string>{},
           py::arg("confidence_correct") = 0.9, py::arg("confidence_corrupt") = 0.9, py::arg("seed") = 0,
           py::arg("view_count") = 8);
  py::class_<OracleBackend, GroundingBackend>(m, "OracleBackend")
      .def(py::init<OracleConfig, OracleConfig>(), py::arg("untextured"), py::arg("textured"))
      .def(py::init<const OracleConfig&>(), py::arg("both"));
  py::class_<FileBackend, GroundingBackend>(m, "FileBackend").def(py::init<std::filesystem::path>());
  py::class_<HttpBackend, GroundingBackend>(m, "HttpBackend")
      .def(py::init([](const std::string& url, double timeout, int max_in_flight) {
             auto o = HttpBackendOptions::from_url(url);
             o.timeout_seconds = timeout;
             o.max_in_flight = max_in_flight;
             return std::make_unique<HttpBackend>(o);
           }),
           py::arg("url"), py::arg("timeout") = 30.0, py::arg("max_in_flight") = 4)
      .def("health", &HttpBackend::health, py::call_guard<py::gil_scoped_release>());

  py::enum_<MultiBox>(m, "MultiBox").value("TOP1", MultiBox::Top1).value("UNION", MultiBox::Union);
  py::class_<VoteOptions>(m, "VoteOptions")
      .def(py::init<>())
      .def_readwrite("iou_cutoff", &VoteOptions::iou_cutoff)
      .def_readwrite("membership_fraction", &VoteOptions::membership_fraction)
      .def_readwrite("min_pixels", &VoteOptions::min_pixels)
      .def_readwrite("o_threshold", &VoteOptions::o_threshold)
      .def_readwrite("multi_box", &VoteOptions::multi_box)
      .def_readwrite("threads", &VoteOptions::threads);

  py::class_<ViewVote>(m, "ViewVote")
      .def(py::init([](int view, double confidence, std::vector<FaceId> masked, std::vector<FaceId> unmasked) {
             ViewVote v;
             v.view = view;
             v.confidence = confidence;
             v.masked_faces = std::move(masked);
             v.visible_unmasked_faces = std::move(unmasked);
             return v;
           }),
           py::arg("view"), py::arg("confidence"), py::arg("masked_faces"), py::arg("visible_unmasked_faces"))
      .def_readonly("view", &ViewVote::view)
      .def_readonly("branch", &ViewVote::branch)
      .def_readonly("confidence", &ViewVote::confidence)
      .def_readonly("masked_faces", &ViewVote::masked_faces)
      .def_readonly("visible_unmasked_faces", &ViewVote::visible_unmasked_faces);

  py::class_<SegmentationResult>(m, "SegmentationResult")
      .def_readonly("member_faces", &SegmentationResult::member_faces)
      .def_readonly("visible_faces", &SegmentationResult::visible_faces)
      .def_readonly("per_view_votes", &SegmentationResult::per_view_votes)
      .def_readonly("view_count", &SegmentationResult::view_count)
      .def_property_readonly("o", [](const SegmentationResult& r) { return r.scores.o; })
      .def_property_readonly("o_smoothed", [](const SegmentationResult& r) { return r.scores.o_smoothed; })
      .def_property_readonly("views_used", [](const SegmentationResult& r) { return r.diagnostics.views_used; })
      .def_property_readonly("backend_failures",
                             [](const SegmentationResult& r) { return r.diagnostics.backend_failures; })
      .def("report_json", [](const SegmentationResult& r, std::uint64_t seed, std::optional<int> target) {
        return report_json(r, ReportMeta{seed, target, "revote"});
      }, py::arg("seed") = 0, py::arg("target_label") = py::none());

  m.def("segment_mesh",
        [](const Mesh& mesh, const Mesh* textured, const QuerySpec& query, const TrajectoryConfig& trajectory,
           GroundingBackend& backend, const VoteOptions& options) {
          return segment_mesh(mesh, textured, query, trajectory, backend, options);
        },
        py::arg("mesh"), py::arg("textured_mesh").none(true), py::arg("query"),
        py::arg("trajectory"), py::arg("backend"), py::arg("options") = VoteOptions{},
        py::call_guard<py::gil_scoped_release>());
  m.def("baseline_segment",
        [](const Mesh& mesh, const Mesh* textured, const QuerySpec& query, const TrajectoryConfig& trajectory,
           GroundingBackend& backend, const VoteOptions& options) {
          return baseline_segment(mesh, textured, query, trajectory, backend, options);
        },
        py::arg("mesh"), py::arg("textured_mesh").none(true), py::arg("query"),
        py::arg("trajectory"), py::arg("backend"), py::arg("options") = VoteOptions{},
        py::call_guard<py::gil_scoped_release>());
  m.def("accumulate", [](const std::vector<ViewVote>& votes, std::size_t m) { return accumulate(votes, m); });
  m.def("smooth", [](const std::vector<double>& o, const Mesh& mesh) { return smooth(o, build_adjacency(mesh)); });
  m.def("threshold", [](const std::vector<double>& o, double t) { return threshold(o, t); },
        py::arg("scores"), py::arg("o_threshold") = 0.0);
  m.def("iou", [](const std::vector<FaceId>& p, const std::vector<FaceId>& t) { return iou(p, t); },
        py::arg("predicted"), py::arg("truth"));

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
