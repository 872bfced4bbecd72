#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshvote/mesh.hpp"
#include "meshvote/revote.hpp"

namespace meshvote {

/// Per-face part labels (-1 = unlabeled) and the part name of each label id.
struct GroundTruth {
  std::vector<int> labels;
  std::map<int, std::string> label_names;

  /// Label id whose name equals `name` (case-insensitive, trimmed).
  std::optional<int> find_label(const std::string& name) const;
  std::string name_of(int label) const;
  std::vector<FaceId> faces_with(int label) const;
};

/// Reads one integer per line, or JSON {"labels": [...], "names": {"0": "door", ...}}.
/// With `expected_faces`, a different count raises LengthMismatch.
GroundTruth load_labels(const std::filesystem::path& path,
                        std::optional<std::size_t> expected_faces = std::nullopt);
GroundTruth parse_labels(const std::string& text);
void save_labels(const GroundTruth& truth, const std::filesystem::path& path);

/// |P ∩ T| / |P ∪ T| on face sets given in any order; 1 when both are empty.
double iou(std::span<const FaceId> predicted, std::span<const FaceId> truth);

/// Same ratio with per-face weights (e.g. areas).
double weighted_iou(std::span<const FaceId> predicted, std::span<const FaceId> truth,
                    std::span<const double> weights);

struct EvalOptions {
  bool visible_only = false;
  std::vector<FaceId> visible_faces;  ///< used when visible_only
  bool area_weighted = false;
  std::vector<double> face_areas;     ///< used when area_weighted
};

struct PartIou {
  std::string part;
  int label = -1;
  double iou = 0.0;
};

struct EvalReport {
  std::string category;
  std::vector<PartIou> parts;
  double miou = 0.0;
};

/// IoU of each predicted face set against the faces carrying the matching label,
/// then the unweighted mean.
EvalReport evaluate_parts(std::span<const std::vector<FaceId>> predicted,
                          std::span<const int> part_labels, const GroundTruth& truth,
                          const EvalOptions& options = {});

/// Single query. The truth label is `target_label` when given, otherwise the label
/// named like the grounding text (UnknownLabel when absent).
EvalReport evaluate(const SegmentationResult& result, const GroundTruth& truth,
                    const EvalOptions& options = {},
                    std::optional<int> target_label = std::nullopt);

/// Multi query: `assigned[f]` is a query index or -1; `query_labels[q]` its truth label.
EvalReport evaluate_assignment(std::span<const int> assigned, std::span<const int> query_labels,
                               const GroundTruth& truth, const EvalOptions& options = {});

/// Truth label for a query text, UnknownLabel when not named in `truth`.
int resolve_label(const GroundTruth& truth, const std::string& grounding_text);

/// CSV: header "category,part,label,iou", one row per part, then a "miou" row.
std::string eval_csv(std::span<const EvalReport> reports);
std::string eval_json(std::span<const EvalReport> reports);
/// Parses `eval_csv` output back into reports.
std::vector<EvalReport> parse_eval_csv(const std::string& text);

/// Mean mIoU per category, in first-seen order.
std::vector<std::pair<std::string, double>> category_means(std::span<const EvalReport> reports);

}  // namespace meshvote
