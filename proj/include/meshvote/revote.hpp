#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshvote/backend.hpp"
#include "meshvote/camera.hpp"
#include "meshvote/mesh.hpp"
#include "meshvote/raster.hpp"

namespace meshvote {

/// How surviving detections of one view become a mask.
enum class MultiBox {
  Top1,   ///< highest-confidence surviving detection only
  Union,  ///< union of the masks of all surviving detections, max confidence
};

struct VoteOptions {
  double iou_cutoff = 0.90;           ///< whole-object filter
  double membership_fraction = 0.5;   ///< share of a face's pixels that must be masked
  std::uint32_t min_pixels = 2;       ///< faces with fewer visible pixels cast no vote
  double o_threshold = 0.0;           ///< membership needs score strictly above this
  MultiBox multi_box = MultiBox::Top1;
  int threads = 0;                    ///< 0 = hardware concurrency, 1 = serial
};

/// Local confidences of one view: +confidence for masked faces, -confidence for the
/// other visible faces. Both lists are ascending and disjoint.
struct ViewVote {
  int view = 0;
  Branch branch = Branch::Untextured;
  double confidence = 0.0;
  std::vector<FaceId> masked_faces;
  std::vector<FaceId> visible_unmasked_faces;

  friend bool operator==(const ViewVote&, const ViewVote&) = default;
};

struct FaceScores {
  std::vector<double> g_untextured;
  std::vector<double> g_textured;
  std::vector<double> o;
  std::vector<double> o_smoothed;
  double o_threshold = 0.0;
  bool textured_branch = true;  ///< false in single-branch mode, where o = g_untextured
};

struct Diagnostics {
  int views_used = 0;           ///< (branch, view) pairs that cast a vote
  int views_skipped = 0;        ///< pairs without a surviving detection or with a failure
  int detections_filtered = 0;  ///< whole-object detections removed
  int backend_failures = 0;

  friend bool operator==(const Diagnostics&, const Diagnostics&) = default;
};

struct SegmentationResult {
  std::vector<FaceId> member_faces;
  FaceScores scores;
  std::vector<ViewVote> per_view_votes;
  QuerySpec query;
  Diagnostics diagnostics;
  int view_count = 0;
  /// Faces owning at least `min_pixels` pixels in some rendered view of any branch.
  std::vector<FaceId> visible_faces;

  std::size_t face_count() const noexcept { return scores.o_smoothed.size(); }
};

/// Drops detections whose box has IoU >= `iou_cutoff` with the rendered object's box.
/// Order is preserved. `removed`, when given, receives the number dropped.
std::vector<Detection> filter_detections(std::span<const Detection> detections,
                                         const RenderOutput& render, double iou_cutoff,
                                         int* removed = nullptr);

ViewVote make_view_vote(const RenderOutput& render, const Detection& detection,
                        const MaskImage& mask, double membership_fraction,
                        std::uint32_t min_pixels = 2);

/// Per-face sum of local confidences. Each face's contributions are summed in sorted
/// order by pairwise summation, so the result does not depend on vote order.
std::vector<double> accumulate(std::span<const ViewVote> votes, std::size_t face_count);

std::vector<double> fuse_branches(std::span<const double> g_untextured,
                                  std::span<const double> g_textured);

/// One pass of averaging each face with its edge neighbours.
std::vector<double> smooth(std::span<const double> scores, const FaceAdjacency& adjacency);

/// Faces whose score is strictly greater than `o_threshold`.
std::vector<FaceId> threshold(std::span<const double> scores, double o_threshold);

/// Votes of both branches for a whole trajectory, as produced by the per-view stage.
struct ViewVotes {
  std::vector<ViewVote> untextured;
  std::vector<ViewVote> textured;
  bool textured_branch = true;
  Diagnostics diagnostics;
  std::vector<FaceId> visible_faces;
  int view_count = 0;
};

/// Renders every view of both branches and collects votes through `backend`.
/// `textured == nullptr` selects single-branch mode. Throws TopologyMismatch when the
/// two meshes differ in faces, MissingTexture when the textured mesh has none.
/// A view whose backend call fails is skipped and counted; when every attempted call
/// failed the last backend error is rethrown.
ViewVotes collect_votes(const Mesh& untextured, const Mesh* textured, const QuerySpec& query,
                        const TrajectoryConfig& trajectory, GroundingBackend& backend,
                        const VoteOptions& options = {});

/// Face Confidence Revoting on collected votes: accumulate per branch, average the
/// branches, smooth once over the adjacency, threshold.
SegmentationResult revote(const ViewVotes& votes, std::size_t face_count,
                          const FaceAdjacency& adjacency, const QuerySpec& query,
                          const VoteOptions& options = {});

/// Baseline aggregation: union of masked faces over all views, no penalties, no smoothing.
SegmentationResult baseline_union(const ViewVotes& votes, std::size_t face_count,
                                  const QuerySpec& query);

SegmentationResult segment_mesh(const Mesh& untextured, const Mesh* textured,
                                const QuerySpec& query, const TrajectoryConfig& trajectory,
                                GroundingBackend& backend, const VoteOptions& options = {});

SegmentationResult baseline_segment(const Mesh& untextured, const Mesh* textured,
                                    const QuerySpec& query, const TrajectoryConfig& trajectory,
                                    GroundingBackend& backend, const VoteOptions& options = {});

/// Per-face label: index of the query with the largest smoothed score (lowest index on
/// ties), or -1 when no score is positive. MeshMismatch when results differ in size.
std::vector<int> assign_multi(std::span<const SegmentationResult> results);

/// Extra fields written into report files.
struct ReportMeta {
  std::uint64_t seed = 0;
  std::optional<int> target_label;
  std::string method = "revote";
};

/// Stable JSON text: query, K, per-face o_smoothed, member_faces, visible_faces,
/// diagnostics, seed.
std::string report_json(const SegmentationResult& result, const ReportMeta& meta);

/// Fields read back from a report file.
struct LoadedReport {
  QuerySpec query;
  int view_count = 0;
  std::vector<double> o_smoothed;
  std::vector<FaceId> member_faces;
  std::vector<FaceId> visible_faces;
  std::optional<int> target_label;
  std::uint64_t seed = 0;
  Diagnostics diagnostics;
};

LoadedReport parse_report(const std::string& text);

}  // namespace meshvote
