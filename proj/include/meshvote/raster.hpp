#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "meshvote/bitmap.hpp"
#include "meshvote/camera.hpp"
#include "meshvote/mesh.hpp"

namespace meshvote {

enum class Shading { Untextured, Textured };

struct ShadingParams {
  double albedo = 0.7;
  double ambient = 0.15;
  std::uint8_t background = 255;
};

struct VisibleFace {
  FaceId face = 0;
  std::uint32_t pixels = 0;

  friend bool operator==(const VisibleFace&, const VisibleFace&) = default;
};

/// One rendered view: shaded RGB image, per-pixel depth-winning face ids, and the
/// faces owning at least one pixel (ascending id) with their pixel tallies.
struct RenderOutput {
  Bitmap image;
  FaceIndexMap face_index_map;
  std::vector<VisibleFace> visible_faces;

  int width() const noexcept { return face_index_map.width(); }
  int height() const noexcept { return face_index_map.height(); }
  /// Pixel tally of `face`, 0 when invisible.
  std::uint32_t pixels_of(FaceId face) const noexcept;

  friend bool operator==(const RenderOutput&, const RenderOutput&) = default;
};

/// Z-buffered rasterization with no back-face culling and a top-left fill rule.
/// Geometry in front of the near plane is clipped. Throws MissingTexture when
/// textured shading is requested for a mesh without texture.
RenderOutput render(const Mesh& mesh, const Viewpoint& viewpoint, Shading shading,
                    const ShadingParams& params = {});

struct FaceMaskFraction {
  FaceId face = 0;
  std::uint32_t visible_pixels = 0;
  std::uint32_t masked_pixels = 0;

  double fraction() const noexcept {
    return visible_pixels ? static_cast<double>(masked_pixels) / visible_pixels : 0.0;
  }
};

/// For every visible face, how many of its pixels the mask covers. Order follows
/// `render.visible_faces`.
std::vector<FaceMaskFraction> faces_in_mask(const RenderOutput& render, const MaskImage& mask);

/// Tight half-open box around all non-background pixels; EmptyRender when there are none.
PixelBox object_bbox(const RenderOutput& render);

/// Silhouette as a binary mask.
MaskImage silhouette_mask(const RenderOutput& render);

/// Rebuilds `visible_faces` from the face-index map.
std::vector<VisibleFace> tally_visible_faces(const FaceIndexMap& map);

/// FIDX file: "FIDX", u32 width, u32 height, u32 version (=1), then width*height
/// little-endian u32 face ids, row-major.
void write_face_index_map(const FaceIndexMap& map, const std::filesystem::path& path);
FaceIndexMap read_face_index_map(const std::filesystem::path& path);

}  // namespace meshvote
