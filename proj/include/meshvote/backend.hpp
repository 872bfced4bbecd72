#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "meshvote/bitmap.hpp"
#include "meshvote/raster.hpp"

namespace meshvote {

/// Object class text and grounding (part) text. Only the grounding text is sent to
/// detectors.
struct QuerySpec {
  std::string object_text;
  std::string grounding_text;

  /// Trims both fields; ConfigError when either is empty afterwards.
  QuerySpec normalized() const;
};

struct Detection {
  PixelBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class Branch { Untextured, Textured };

const char* branch_name(Branch branch) noexcept;

/// What a backend sees of one view. Neural backends only use `render.image`; the oracle
/// reads the face-index map.
struct ViewContext {
  Branch branch;
  int view;
  const RenderOutput& render;
};

/// Per-view provider of text-grounded detections and box-prompted masks.
/// Implementations must tolerate concurrent calls for different views.
class GroundingBackend {
 public:
  virtual ~GroundingBackend() = default;

  /// Detections sorted by descending confidence.
  virtual std::vector<Detection> detect(const ViewContext& view, const QuerySpec& query) = 0;

  /// Binary mask with the dimensions of `view.render`.
  virtual MaskImage segment(const ViewContext& view, const PixelBox& box) = 0;
};

std::vector<Detection> sort_detections(std::vector<Detection> detections);

// ---------------------------------------------------------------- oracle

enum class CorruptionKind { None, Complement, Shift, Drop };

/// Scripted error on a set of views. With `random_count > 0`, that many distinct views
/// are drawn from the oracle seed instead of using `views`.
struct Corruption {
  CorruptionKind kind = CorruptionKind::None;
  std::vector<int> views;
  int dx = 0;
  int dy = 0;
  int random_count = 0;
};

/// Parses "none", "complement:1,5", "drop:3", "shift:2:5:0" (views;dx;dy with ':'),
/// "complement:random2". ConfigError on malformed text.
Corruption parse_corruption(const std::string& text);

struct OracleConfig {
  std::vector<int> gt_labels;
  int target_label = 0;
  std::vector<Corruption> corruptions;
  double confidence_correct = 0.9;
  double confidence_corrupt = 0.9;
  std::uint64_t seed = 0;

  /// Copy with every random corruption replaced by explicit view ids in [0, view_count).
  OracleConfig resolved(int view_count) const;
  /// Corruption applied to `view`, first match wins. PreconditionError while a random
  /// corruption is unresolved.
  Corruption corruption_for(int view) const;
};

/// `count` distinct view ids in [0, view_count), drawn deterministically from `seed`.
std::vector<int> choose_views(std::uint64_t seed, int view_count, int count);

/// Oracle bound to one rendered view: masks derive from ground-truth labels of the
/// depth-winning faces, then the view's corruption is applied.
class OracleView {
 public:
  std::vector<Detection> detect() const;
  MaskImage segment(const PixelBox& box) const;

  const MaskImage& mask() const noexcept { return mask_; }
  CorruptionKind corruption() const noexcept { return kind_; }

 private:
  friend OracleView oracle_attach(const RenderOutput&, const OracleConfig&, int);
  MaskImage mask_;
  std::optional<PixelBox> box_;
  double confidence_ = 0.0;
  CorruptionKind kind_ = CorruptionKind::None;
};

/// LabelMismatch when the render references a face without a label.
OracleView oracle_attach(const RenderOutput& render, const OracleConfig& config, int view);

/// Ground-truth driven backend, one config per branch.
class OracleBackend final : public GroundingBackend {
 public:
  OracleBackend(OracleConfig untextured, OracleConfig textured);
  explicit OracleBackend(const OracleConfig& both) : OracleBackend(both, both) {}

  std::vector<Detection> detect(const ViewContext& view, const QuerySpec& query) override;
  MaskImage segment(const ViewContext& view, const PixelBox& box) override;

  const OracleConfig& config(Branch branch) const noexcept {
    return branch == Branch::Untextured ? untextured_ : textured_;
  }

 private:
  OracleConfig untextured_;
  OracleConfig textured_;
};

// ---------------------------------------------------------------- files

/// Directory of a view inside a run: `<root>/<branch>/view_<k>`.
std::filesystem::path view_directory(const std::filesystem::path& root, Branch branch, int view);

/// Replays `<root>/<branch>/view_<k>/{detections.json, mask.png}`.
class FileBackend final : public GroundingBackend {
 public:
  explicit FileBackend(std::filesystem::path root) : root_(std::move(root)) {}

  std::vector<Detection> detect(const ViewContext& view, const QuerySpec& query) override;
  MaskImage segment(const ViewContext& view, const PixelBox& box) override;

 private:
  std::filesystem::path root_;
};

std::string detections_to_json(const std::vector<Detection>& detections);
std::vector<Detection> detections_from_json(const std::string& text);

/// Decorator writing every view it serves into the file-backend layout, plus the
/// rendered image and FIDX map. The stored mask is the union of all masks of a view.
class RecordingBackend final : public GroundingBackend {
 public:
  RecordingBackend(GroundingBackend& inner, std::filesystem::path root)
      : inner_(inner), root_(std::move(root)) {}

  std::vector<Detection> detect(const ViewContext& view, const QuerySpec& query) override;
  MaskImage segment(const ViewContext& view, const PixelBox& box) override;

 private:
  GroundingBackend& inner_;
  std::filesystem::path root_;
  std::mutex mutex_;
  std::map<std::pair<Branch, int>, MaskImage> masks_;
};

// ---------------------------------------------------------------- http

struct HttpBackendOptions {
  std::string host = "127.0.0.1";
  int port = 8731;
  double timeout_seconds = 30.0;
  int max_in_flight = 4;

  /// Accepts "http://host:port", "host:port" or "host".
  static HttpBackendOptions from_url(const std::string& url);
};

/// Client of the detection/segmentation sidecar (POST /detect, POST /segment, GET /health).
/// Transport failures and non-200 responses raise BackendUnavailable.
class HttpBackend final : public GroundingBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::vector<Detection> detect(const ViewContext& view, const QuerySpec& query) override;
  MaskImage segment(const ViewContext& view, const PixelBox& box) override;

  /// Body of GET /health.
  std::string health();

  const HttpBackendOptions& options() const noexcept { return options_; }

 private:
  std::string post(const std::string& route, const std::string& body);

  HttpBackendOptions options_;
  std::counting_semaphore<64> in_flight_;
};

}  // namespace meshvote
