#include "meshvote/backend.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <json.hpp>
#include <random>
#include <sstream>

#include "meshvote/error.hpp"
#include "meshvote/image_io.hpp"

namespace meshvote {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

int to_int(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer '" + s + "' in '" + context + "'");
  }
}

MaskImage translate(const MaskImage& mask, int dx, int dy) {
  MaskImage out(mask.width(), mask.height(), 1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const int tx = x + dx;
      const int ty = y + dy;
      if (tx >= 0 && tx < mask.width() && ty >= 0 && ty < mask.height()) out.at(tx, ty) = 1;
    }
  }
  return out;
}

}  // namespace

QuerySpec QuerySpec::normalized() const {
  QuerySpec q{trim(object_text), trim(grounding_text)};
  if (q.object_text.empty()) throw ConfigError("object text must not be empty");
  if (q.grounding_text.empty()) throw ConfigError("grounding text must not be empty");
  return q;
}

const char* branch_name(Branch branch) noexcept {
  return branch == Branch::Untextured ? "untextured" : "textured";
}

std::vector<Detection> sort_detections(std::vector<Detection> detections) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  return detections;
}

// ---------------------------------------------------------------- oracle

Corruption parse_corruption(const std::string& text) {
  const auto parts = split(trim(text), ':');
  if (parts.empty()) throw ConfigError("empty corruption spec");
  Corruption c;
  const std::string& kind = parts[0];
  if (kind == "none") {
    if (parts.size() != 1) throw ConfigError("'none' takes no arguments");
    return c;
  }
  if (kind == "complement") {
    c.kind = CorruptionKind::Complement;
  } else if (kind == "drop") {
    c.kind = CorruptionKind::Drop;
  } else if (kind == "shift") {
    c.kind = CorruptionKind::Shift;
  } else {
    throw ConfigError("unknown corruption kind '" + kind + "'");
  }
  const std::size_t expected = c.kind == CorruptionKind::Shift ? 4 : 2;
  if (parts.size() != expected) {
    throw ConfigError("corruption '" + text + "' needs " +
                      (c.kind == CorruptionKind::Shift ? "shift:<views>:<dx>:<dy>"
                                                       : kind + ":<views>"));
  }
  if (parts[1].rfind("random", 0) == 0) {
    c.random_count = to_int(parts[1].substr(6), text);
    if (c.random_count < 1) throw ConfigError("random view count must be positive");
  } else {
    for (const auto& v : split(parts[1], ',')) {
      const int id = to_int(trim(v), text);
      if (id < 0) throw ConfigError("view ids must be non-negative");
      c.views.push_back(id);
    }
  }
  if (c.kind == CorruptionKind::Shift) {
    c.dx = to_int(parts[2], text);
    c.dy = to_int(parts[3], text);
  }
  return c;
}

std::vector<int> choose_views(std::uint64_t seed, int view_count, int count) {
  if (count > view_count) throw ConfigError("cannot corrupt more views than exist");
  std::vector<int> ids(static_cast<std::size_t>(view_count));
  for (int i = 0; i < view_count; ++i) ids[i] = i;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with an explicit draw so results do not depend on
  // library-specific distribution implementations.
  for (int i = 0; i < count; ++i) {
    const auto span = static_cast<std::uint64_t>(view_count - i);
    const auto j = i + static_cast<int>(rng() % span);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

OracleConfig OracleConfig::resolved(int view_count) const {
  OracleConfig out = *this;
  std::uint64_t stream = seed;
  for (Corruption& c : out.corruptions) {
    if (c.random_count > 0) {
      c.views = choose_views(stream++, view_count, c.random_count);
      c.random_count = 0;
    }
    for (int v : c.views) {
      if (v >= view_count) {
        throw ConfigError("corrupted view " + std::to_string(v) + " outside 0.." +
                          std::to_string(view_count - 1));
      }
    }
  }
  return out;
}

Corruption OracleConfig::corruption_for(int view) const {
  for (const Corruption& c : corruptions) {
    if (c.random_count > 0) {
      throw PreconditionError("random oracle corruption used before resolved(view_count)");
    }
    if (c.kind != CorruptionKind::None &&
        std::find(c.views.begin(), c.views.end(), view) != c.views.end()) {
      return c;
    }
  }
  return {};
}

OracleView oracle_attach(const RenderOutput& render, const OracleConfig& config, int view) {
  MaskImage target(render.width(), render.height(), 1);
  MaskImage other(render.width(), render.height(), 1);
  auto ids = render.face_index_map.data();
  auto t = target.data();
  auto o = other.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kBackgroundFace) continue;
    if (ids[i] >= config.gt_labels.size()) {
      throw LabelMismatch("face " + std::to_string(ids[i]) + " has no ground-truth label (" +
                          std::to_string(config.gt_labels.size()) + " labels)");
    }
    (config.gt_labels[ids[i]] == config.target_label ? t : o)[i] = 1;
  }

  OracleView ov;
  const Corruption c = config.corruption_for(view);
  ov.kind_ = c.kind;
  const auto target_box = mask_bounding_box(target);
  switch (c.kind) {
    case CorruptionKind::None:
      ov.mask_ = std::move(target);
      ov.box_ = target_box;
      ov.confidence_ = config.confidence_correct;
      break;
    case CorruptionKind::Complement: {
      // The detector still finds the part; the segmenter returns everything else.
      const auto other_box = mask_bounding_box(other);
      ov.mask_ = std::move(other);
      ov.box_ = other_box ? (target_box ? target_box : other_box) : std::nullopt;
      ov.confidence_ = config.confidence_corrupt;
      break;
    }
    case CorruptionKind::Shift:
      ov.mask_ = translate(target, c.dx, c.dy);
      ov.box_ = mask_bounding_box(ov.mask_);
      ov.confidence_ = config.confidence_corrupt;
      break;
    case CorruptionKind::Drop:
      ov.mask_ = MaskImage(render.width(), render.height(), 1);
      ov.box_ = std::nullopt;
      ov.confidence_ = config.confidence_corrupt;
      break;
  }
  return ov;
}

std::vector<Detection> OracleView::detect() const {
  if (!box_) return {};
  return {Detection{*box_, confidence_}};
}

MaskImage OracleView::segment(const PixelBox& box) const {
  if (!box.valid_within(mask_.width(), mask_.height())) {
    throw PreconditionError("segment box lies outside the image");
  }
  return mask_;
}

OracleBackend::OracleBackend(OracleConfig untextured, OracleConfig textured)
    : untextured_(std::move(untextured)), textured_(std::move(textured)) {}

std::vector<Detection> OracleBackend::detect(const ViewContext& view, const QuerySpec&) {
  return oracle_attach(view.render, config(view.branch), view.view).detect();
}

MaskImage OracleBackend::segment(const ViewContext& view, const PixelBox& box) {
  return oracle_attach(view.render, config(view.branch), view.view).segment(box);
}

// ---------------------------------------------------------------- files

std::filesystem::path view_directory(const std::filesystem::path& root, Branch branch, int view) {
  return root / branch_name(branch) / ("view_" + std::to_string(view));
}

std::string detections_to_json(const std::vector<Detection>& detections) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : detections) {
    arr.push_back({{"bbox", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}}, {"score", d.confidence}});
  }
  return arr.dump(2) + "\n";
}

std::vector<Detection> detections_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("detections: ") + e.what());
  }
  if (arr.is_object() && arr.contains("detections")) arr = arr["detections"];
  if (!arr.is_array()) throw ParseError("detections: expected an array");
  std::vector<Detection> out;
  for (const auto& item : arr) {
    try {
      const auto& b = item.at("bbox");
      if (!b.is_array() || b.size() != 4) throw ParseError("detections: bbox needs 4 numbers");
      Detection d{{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                  item.at("score").get<double>()};
      out.push_back(d);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("detections: ") + e.what());
    }
  }
  return sort_detections(std::move(out));
}

std::vector<Detection> FileBackend::detect(const ViewContext& view, const QuerySpec&) {
  const auto path = view_directory(root_, view.branch, view.view) / "detections.json";
  if (!std::filesystem::exists(path)) throw MissingPrecomputed("missing " + path.string());
  return detections_from_json(read_text_file(path));
}

MaskImage FileBackend::segment(const ViewContext& view, const PixelBox&) {
  const auto path = view_directory(root_, view.branch, view.view) / "mask.png";
  if (!std::filesystem::exists(path)) throw MissingPrecomputed("missing " + path.string());
  MaskImage mask = read_mask_png(path);
  if (!mask.same_size(view.render.face_index_map)) {
    throw DimensionMismatch(path.string() + " does not match the rendered view size");
  }
  return mask;
}

std::vector<Detection> RecordingBackend::detect(const ViewContext& view, const QuerySpec& query) {
  auto detections = inner_.detect(view, query);
  const auto dir = view_directory(root_, view.branch, view.view);
  std::filesystem::create_directories(dir);
  write_png(view.render.image, dir / "image.png");
  write_face_index_map(view.render.face_index_map, dir / "fidx.bin");
  write_text_file(dir / "detections.json", detections_to_json(detections));
  return detections;
}

MaskImage RecordingBackend::segment(const ViewContext& view, const PixelBox& box) {
  MaskImage mask = inner_.segment(view, box);
  MaskImage merged;
  {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = masks_.try_emplace({view.branch, view.view}, mask);
    if (!inserted && it->second.same_size(mask)) {
      auto dst = it->second.data();
      auto src = mask.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = dst[i] | src[i];
    }
    merged = it->second;
  }
  const auto dir = view_directory(root_, view.branch, view.view);
  std::filesystem::create_directories(dir);
  write_mask_png(merged, dir / "mask.png");
  return mask;
}

}  // namespace meshvote
