#include "meshvote/revote.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <thread>

#include "meshvote/error.hpp"

namespace meshvote {
namespace {

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 4) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct ViewTask {
  Branch branch;
  int view;
};

struct ViewOutcome {
  std::optional<ViewVote> vote;
  std::vector<FaceId> visible;
  int filtered = 0;
  bool attempted = false;
  bool failed = false;
  std::exception_ptr error;  // backend failure (counted) or fatal error (rethrown)
  bool fatal = false;
};

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

ViewOutcome run_view(const Mesh& mesh, Shading shading, const Viewpoint& viewpoint, Branch branch,
                     const QuerySpec& query, GroundingBackend& backend, const VoteOptions& options) {
  ViewOutcome out;
  const RenderOutput render = meshvote::render(mesh, viewpoint, shading);
  for (const VisibleFace& vf : render.visible_faces) {
    if (vf.pixels >= options.min_pixels) out.visible.push_back(vf.face);
  }
  if (render.visible_faces.empty()) return out;

  const ViewContext ctx{branch, viewpoint.index, render};
  out.attempted = true;
  try {
    const auto detections = backend.detect(ctx, query);
    const auto kept = filter_detections(detections, render, options.iou_cutoff, &out.filtered);
    if (kept.empty()) return out;

    if (options.multi_box == MultiBox::Top1) {
      const MaskImage mask = backend.segment(ctx, kept.front().box);
      out.vote = make_view_vote(render, kept.front(), mask, options.membership_fraction,
                                options.min_pixels);
    } else {
      MaskImage merged(render.width(), render.height(), 1);
      Detection best = kept.front();
      for (const Detection& d : kept) {
        const MaskImage mask = backend.segment(ctx, d.box);
        if (!mask.same_size(merged)) throw DimensionMismatch("mask size differs from view");
        auto dst = merged.data();
        auto src = mask.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (dst[i] | src[i]) ? 1 : 0;
        if (d.confidence > best.confidence) best = d;
      }
      out.vote = make_view_vote(render, best, merged, options.membership_fraction, options.min_pixels);
    }
    out.vote->branch = branch;
  } catch (const Error& e) {
    if (!e.is_backend_error()) throw;
    spdlog::warn("{} view {} skipped: {}", branch_name(branch), viewpoint.index, e.what());
    out.failed = true;
    out.error = std::current_exception();
  }
  return out;
}

}  // namespace

std::vector<Detection> filter_detections(std::span<const Detection> detections,
                                         const RenderOutput& render, double iou_cutoff,
                                         int* removed) {
  std::vector<Detection> kept;
  int dropped = 0;
  if (!detections.empty()) {
    const PixelBox object = object_bbox(render);
    for (const Detection& d : detections) {
      if (box_iou(d.box, object) >= iou_cutoff) {
        ++dropped;
      } else {
        kept.push_back(d);
      }
    }
  }
  if (removed) *removed = dropped;
  return kept;
}

ViewVote make_view_vote(const RenderOutput& render, const Detection& detection,
                        const MaskImage& mask, double membership_fraction,
                        std::uint32_t min_pixels) {
  ViewVote vote;
  vote.confidence = detection.confidence;
  for (const FaceMaskFraction& f : faces_in_mask(render, mask)) {
    if (f.visible_pixels < min_pixels) continue;
    if (f.fraction() >= membership_fraction) {
      vote.masked_faces.push_back(f.face);
    } else {
      vote.visible_unmasked_faces.push_back(f.face);
    }
  }
  return vote;
}

std::vector<double> accumulate(std::span<const ViewVote> votes, std::size_t face_count) {
  std::vector<std::size_t> offsets(face_count + 1, 0);
  auto check = [&](FaceId f) {
    if (f >= face_count) {
      throw PreconditionError("vote references face " + std::to_string(f) + " beyond face count " +
                              std::to_string(face_count));
    }
  };
  for (const ViewVote& v : votes) {
    for (const auto* list : {&v.masked_faces, &v.visible_unmasked_faces}) {
      for (FaceId f : *list) {
        check(f);
        ++offsets[f + 1];
      }
    }
  }
  for (std::size_t f = 0; f < face_count; ++f) offsets[f + 1] += offsets[f];
  std::vector<double> terms(offsets.back());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const ViewVote& v : votes) {
    for (FaceId f : v.masked_faces) terms[cursor[f]++] = v.confidence;
    for (FaceId f : v.visible_unmasked_faces) terms[cursor[f]++] = -v.confidence;
  }
  std::vector<double> g(face_count, 0.0);
  for (std::size_t f = 0; f < face_count; ++f) {
    const auto first = terms.begin() + static_cast<std::ptrdiff_t>(offsets[f]);
    const auto last = terms.begin() + static_cast<std::ptrdiff_t>(offsets[f + 1]);
    std::sort(first, last);
    g[f] = pairwise_sum(std::span<const double>(terms.data() + offsets[f], offsets[f + 1] - offsets[f]));
  }
  return g;
}

std::vector<double> fuse_branches(std::span<const double> g_untextured,
                                  std::span<const double> g_textured) {
  if (g_untextured.size() != g_textured.size()) {
    throw LengthMismatch("branch score arrays differ in length");
  }
  std::vector<double> o(g_untextured.size());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (g_untextured[i] + g_textured[i]) / 2.0;
  return o;
}

std::vector<double> smooth(std::span<const double> scores, const FaceAdjacency& adjacency) {
  if (scores.size() != adjacency.face_count()) {
    throw LengthMismatch("score array and adjacency differ in face count");
  }
  std::vector<double> out(scores.size());
  for (std::size_t f = 0; f < scores.size(); ++f) {
    const auto nb = adjacency.neighbors(f);
    double sum = scores[f];
    for (FaceId n : nb) sum += scores[n];
    out[f] = sum / static_cast<double>(nb.size() + 1);
  }
  return out;
}

std::vector<FaceId> threshold(std::span<const double> scores, double o_threshold) {
  std::vector<FaceId> members;
  for (std::size_t f = 0; f < scores.size(); ++f) {
    if (scores[f] > o_threshold) members.push_back(static_cast<FaceId>(f));
  }
  return members;
}

ViewVotes collect_votes(const Mesh& untextured, const Mesh* textured, const QuerySpec& query,
                        const TrajectoryConfig& trajectory, GroundingBackend& backend,
                        const VoteOptions& options) {
  if (textured) {
    if (!untextured.same_topology(*textured)) {
      throw TopologyMismatch("textured and untextured meshes must share faces and vertex count");
    }
    if (!textured->has_texture()) throw MissingTexture("textured branch mesh carries no texture");
  }
  const QuerySpec q = query.normalized();
  const auto views = generate_trajectory(trajectory);

  std::vector<ViewTask> tasks;
  for (const Viewpoint& vp : views) tasks.push_back({Branch::Untextured, vp.index});
  if (textured) {
    for (const Viewpoint& vp : views) tasks.push_back({Branch::Textured, vp.index});
  }
  std::vector<ViewOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
    const ViewTask& t = tasks[i];
    const bool tex = t.branch == Branch::Textured;
    try {
      outcomes[i] = run_view(tex ? *textured : untextured, tex ? Shading::Textured : Shading::Untextured,
                             views[static_cast<std::size_t>(t.view)], t.branch, q, backend, options);
    } catch (...) {
      outcomes[i].fatal = true;
      outcomes[i].error = std::current_exception();
    }
  });

  ViewVotes result;
  result.textured_branch = textured != nullptr;
  result.view_count = trajectory.view_count;
  std::vector<FaceId> visible;
  int attempted = 0;
  std::exception_ptr first_failure;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ViewOutcome& o = outcomes[i];
    if (o.fatal) std::rethrow_exception(o.error);
    visible.insert(visible.end(), o.visible.begin(), o.visible.end());
    result.diagnostics.detections_filtered += o.filtered;
    attempted += o.attempted ? 1 : 0;
    if (o.failed) {
      ++result.diagnostics.backend_failures;
      if (!first_failure) first_failure = o.error;
    }
    if (o.vote) {
      ++result.diagnostics.views_used;
      o.vote->view = tasks[i].view;
      (tasks[i].branch == Branch::Untextured ? result.untextured : result.textured)
          .push_back(std::move(*o.vote));
    } else {
      ++result.diagnostics.views_skipped;
    }
  }
  if (attempted > 0 && result.diagnostics.backend_failures == attempted) {
    std::rethrow_exception(first_failure);
  }
  std::sort(visible.begin(), visible.end());
  visible.erase(std::unique(visible.begin(), visible.end()), visible.end());
  result.visible_faces = std::move(visible);
  return result;
}

SegmentationResult revote(const ViewVotes& votes, std::size_t face_count,
                          const FaceAdjacency& adjacency, const QuerySpec& query,
                          const VoteOptions& options) {
  SegmentationResult r;
  r.query = query;
  r.view_count = votes.view_count;
  r.diagnostics = votes.diagnostics;
  r.visible_faces = votes.visible_faces;
  r.scores.textured_branch = votes.textured_branch;
  r.scores.o_threshold = options.o_threshold;
  r.scores.g_untextured = accumulate(votes.untextured, face_count);
  if (votes.textured_branch) {
    r.scores.g_textured = accumulate(votes.textured, face_count);
    r.scores.o = fuse_branches(r.scores.g_untextured, r.scores.g_textured);
  } else {
    r.scores.g_textured.assign(face_count, 0.0);
    r.scores.o = r.scores.g_untextured;
  }
  r.scores.o_smoothed = smooth(r.scores.o, adjacency);
  r.member_faces = threshold(r.scores.o_smoothed, options.o_threshold);
  r.per_view_votes = votes.untextured;
  r.per_view_votes.insert(r.per_view_votes.end(), votes.textured.begin(), votes.textured.end());
  return r;
}

SegmentationResult baseline_union(const ViewVotes& votes, std::size_t face_count,
                                  const QuerySpec& query) {
  SegmentationResult r;
  r.query = query;
  r.view_count = votes.view_count;
  r.diagnostics = votes.diagnostics;
  r.visible_faces = votes.visible_faces;
  r.scores.textured_branch = votes.textured_branch;

  auto positive_only = [&](const std::vector<ViewVote>& in) {
    std::vector<ViewVote> out = in;
    for (ViewVote& v : out) v.visible_unmasked_faces.clear();
    return accumulate(out, face_count);
  };
  r.scores.g_untextured = positive_only(votes.untextured);
  r.scores.g_textured = votes.textured_branch ? positive_only(votes.textured)
                                              : std::vector<double>(face_count, 0.0);
  r.scores.o = votes.textured_branch ? fuse_branches(r.scores.g_untextured, r.scores.g_textured)
                                     : r.scores.g_untextured;
  r.scores.o_smoothed = r.scores.o;

  std::vector<FaceId> members;
  for (const auto* list : {&votes.untextured, &votes.textured}) {
    for (const ViewVote& v : *list) members.insert(members.end(), v.masked_faces.begin(), v.masked_faces.end());
  }
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  r.member_faces = std::move(members);
  r.per_view_votes = votes.untextured;
  r.per_view_votes.insert(r.per_view_votes.end(), votes.textured.begin(), votes.textured.end());
  return r;
}

SegmentationResult segment_mesh(const Mesh& untextured, const Mesh* textured,
                                const QuerySpec& query, const TrajectoryConfig& trajectory,
                                GroundingBackend& backend, const VoteOptions& options) {
  const ViewVotes votes = collect_votes(untextured, textured, query, trajectory, backend, options);
  return revote(votes, untextured.face_count(), build_adjacency(untextured), query.normalized(), options);
}

SegmentationResult baseline_segment(const Mesh& untextured, const Mesh* textured,
                                    const QuerySpec& query, const TrajectoryConfig& trajectory,
                                    GroundingBackend& backend, const VoteOptions& options) {
  const ViewVotes votes = collect_votes(untextured, textured, query, trajectory, backend, options);
  return baseline_union(votes, untextured.face_count(), query.normalized());
}

std::vector<int> assign_multi(std::span<const SegmentationResult> results) {
  if (results.empty()) return {};
  const std::size_t m = results.front().face_count();
  for (const auto& r : results) {
    if (r.face_count() != m) throw MeshMismatch("segmentation results cover different meshes");
  }
  std::vector<int> labels(m, -1);
  for (std::size_t f = 0; f < m; ++f) {
    double best = 0.0;
    for (std::size_t q = 0; q < results.size(); ++q) {
      const double s = results[q].scores.o_smoothed[f];
      if (s > best) {
        best = s;
        labels[f] = static_cast<int>(q);
      }
    }
  }
  return labels;
}

std::string report_json(const SegmentationResult& result, const ReportMeta& meta) {
  nlohmann::ordered_json j;
  j["query"] = {{"object", result.query.object_text}, {"grounding", result.query.grounding_text}};
  j["method"] = meta.method;
  j["K"] = result.view_count;
  j["seed"] = meta.seed;
  j["target_label"] = meta.target_label ? nlohmann::ordered_json(*meta.target_label) : nullptr;
  j["o_threshold"] = result.scores.o_threshold;
  j["textured_branch"] = result.scores.textured_branch;
  j["face_count"] = result.face_count();
  j["o_smoothed"] = result.scores.o_smoothed;
  j["member_faces"] = result.member_faces;
  j["visible_faces"] = result.visible_faces;
  j["diagnostics"] = {{"views_used", result.diagnostics.views_used},
                      {"views_skipped", result.diagnostics.views_skipped},
                      {"detections_filtered", result.diagnostics.detections_filtered},
                      {"backend_failures", result.diagnostics.backend_failures}};
  return j.dump(2) + "\n";
}

LoadedReport parse_report(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LoadedReport r;
    r.query.object_text = j.at("query").at("object").get<std::string>();
    r.query.grounding_text = j.at("query").at("grounding").get<std::string>();
    r.view_count = j.at("K").get<int>();
    r.o_smoothed = j.at("o_smoothed").get<std::vector<double>>();
    r.member_faces = j.at("member_faces").get<std::vector<FaceId>>();
    r.visible_faces = j.value("visible_faces", std::vector<FaceId>{});
    if (j.contains("target_label") && !j["target_label"].is_null()) {
      r.target_label = j["target_label"].get<int>();
    }
    r.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("diagnostics")) {
      const auto& d = j["diagnostics"];
      r.diagnostics.views_used = d.value("views_used", 0);
      r.diagnostics.views_skipped = d.value("views_skipped", 0);
      r.diagnostics.detections_filtered = d.value("detections_filtered", 0);
      r.diagnostics.backend_failures = d.value("backend_failures", 0);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

}  // namespace meshvote
