#pragma once

#include <vector>

#include "meshvote/geometry.hpp"

namespace meshvote {

enum class UpAxis { X, Y, Z };

/// Fixed spherical camera trajectory: for every polar angle, `view_count / rings`
/// azimuths evenly spaced over [0, 360) degrees, all looking at the world origin.
struct TrajectoryConfig {
  int view_count = 8;
  double radius = 2.0;
  std::vector<double> polar_angles_deg{75.0, 115.0};
  int image_size = 512;
  double fov_y_deg = 70.0;  /// a radius-1 object at r=2 spans ~82% of the frame
  UpAxis up_axis = UpAxis::Y;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

inline constexpr double kNearPlane = 0.01;
inline constexpr double kFarPlane = 100.0;

struct Viewpoint {
  int index = 0;
  double radius = 0.0;
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  Vec3 position = Vec3::Zero();
  Mat4 view = Mat4::Identity();        ///< world -> camera, camera looks down -z
  Mat4 projection = Mat4::Identity();  ///< OpenGL-style perspective
  int width = 0;
  int height = 0;

  /// Unit vector the camera looks along (towards the origin).
  Vec3 forward() const;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();  ///< continuous pixel coordinates, y grows downwards
  double depth = 0.0;         ///< distance along the camera forward axis
  bool behind_camera = false; ///< depth <= near plane; `pixel` is meaningless then
};

std::vector<Viewpoint> generate_trajectory(const TrajectoryConfig& config);

/// Single viewpoint from spherical parameters (used by the trajectory and by tests).
Viewpoint make_viewpoint(int index, double radius, double theta_deg, double phi_deg,
                         int image_size, double fov_y_deg, UpAxis up_axis = UpAxis::Y);

Projection project(const Viewpoint& viewpoint, const Vec3& point);

/// Inverse of `project` for a point in front of the camera.
Vec3 unproject(const Viewpoint& viewpoint, const Vec2& pixel, double depth);

/// Polar axis for an `UpAxis` value.
Vec3 axis_vector(UpAxis axis);

}  // namespace meshvote
