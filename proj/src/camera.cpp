#include "meshvote/camera.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "meshvote/error.hpp"

namespace meshvote {
namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Two axes completing the polar axis to a right-handed frame, in the order used for
// (cos phi, sin phi).
std::pair<Vec3, Vec3> equator_axes(UpAxis axis) {
  switch (axis) {
    case UpAxis::X: return {Vec3::UnitY(), Vec3::UnitZ()};
    case UpAxis::Y: return {Vec3::UnitX(), Vec3::UnitZ()};
    case UpAxis::Z: return {Vec3::UnitX(), Vec3::UnitY()};
  }
  return {Vec3::UnitX(), Vec3::UnitZ()};
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Vec3& fallback_up) {
  const Vec3 f = (target - eye).normalized();
  Vec3 s = f.cross(up);
  if (s.norm() < 1e-9) s = f.cross(fallback_up);
  s.normalize();
  const Vec3 u = s.cross(f);
  Mat4 m = Mat4::Identity();
  m.block<1, 3>(0, 0) = s.transpose();
  m.block<1, 3>(1, 0) = u.transpose();
  m.block<1, 3>(2, 0) = -f.transpose();
  m(0, 3) = -s.dot(eye);
  m(1, 3) = -u.dot(eye);
  m(2, 3) = f.dot(eye);
  return m;
}

Mat4 perspective(double fov_y_deg, double aspect, double near_plane, double far_plane) {
  const double t = 1.0 / std::tan(deg2rad(fov_y_deg) / 2.0);
  Mat4 p = Mat4::Zero();
  p(0, 0) = t / aspect;
  p(1, 1) = t;
  p(2, 2) = (far_plane + near_plane) / (near_plane - far_plane);
  p(2, 3) = 2.0 * far_plane * near_plane / (near_plane - far_plane);
  p(3, 2) = -1.0;
  return p;
}

}  // namespace

Vec3 axis_vector(UpAxis axis) {
  switch (axis) {
    case UpAxis::X: return Vec3::UnitX();
    case UpAxis::Y: return Vec3::UnitY();
    case UpAxis::Z: return Vec3::UnitZ();
  }
  return Vec3::UnitY();
}

void TrajectoryConfig::validate() const {
  if (view_count < 2 || view_count % 2 != 0) {
    throw ConfigError("view count must be even and >= 2 (got " + std::to_string(view_count) + ")");
  }
  if (polar_angles_deg.empty()) throw ConfigError("at least one polar angle is required");
  if (view_count % static_cast<int>(polar_angles_deg.size()) != 0) {
    throw ConfigError("view count must be divisible by the number of polar angles");
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("camera radius must be positive");
  for (double theta : polar_angles_deg) {
    if (!(theta > 0.0 && theta < 180.0)) {
      throw ConfigError("polar angles must lie strictly between 0 and 180 degrees");
    }
  }
  if (!(fov_y_deg > 10.0 && fov_y_deg < 120.0)) {
    throw ConfigError("vertical field of view must lie in (10, 120) degrees");
  }
  if (image_size < 1) throw ConfigError("image size must be positive");
}

Vec3 Viewpoint::forward() const { return -view.block<1, 3>(2, 0).transpose(); }

Viewpoint make_viewpoint(int index, double radius, double theta_deg, double phi_deg,
                         int image_size, double fov_y_deg, UpAxis up_axis) {
  const double theta = deg2rad(theta_deg);
  const double phi = deg2rad(phi_deg);
  const Vec3 up = axis_vector(up_axis);
  const auto [e1, e2] = equator_axes(up_axis);

  Viewpoint vp;
  vp.index = index;
  vp.radius = radius;
  vp.theta_deg = theta_deg;
  vp.phi_deg = phi_deg;
  vp.position = radius * (std::sin(theta) * std::cos(phi) * e1 + std::cos(theta) * up +
                          std::sin(theta) * std::sin(phi) * e2);
  const Vec3 fallback = up_axis == UpAxis::X ? Vec3::UnitZ() : Vec3::UnitX();
  vp.view = look_at(vp.position, Vec3::Zero(), up, fallback);
  vp.projection = perspective(fov_y_deg, 1.0, kNearPlane, kFarPlane);
  vp.width = image_size;
  vp.height = image_size;
  return vp;
}

std::vector<Viewpoint> generate_trajectory(const TrajectoryConfig& config) {
  config.validate();
  const int per_ring = config.view_count / static_cast<int>(config.polar_angles_deg.size());
  std::vector<Viewpoint> views;
  views.reserve(static_cast<std::size_t>(config.view_count));
  for (double theta : config.polar_angles_deg) {
    for (int i = 0; i < per_ring; ++i) {
      const double phi = 360.0 * i / per_ring;
      views.push_back(make_viewpoint(static_cast<int>(views.size()), config.radius, theta, phi,
                                     config.image_size, config.fov_y_deg, config.up_axis));
    }
  }
  return views;
}

Projection project(const Viewpoint& viewpoint, const Vec3& point) {
  const Vec4 cam = viewpoint.view * point.homogeneous();
  Projection out;
  out.depth = -cam.z();
  if (out.depth <= kNearPlane) {
    out.behind_camera = true;
    return out;
  }
  const Vec4 clip = viewpoint.projection * cam;
  const double ndc_x = clip.x() / clip.w();
  const double ndc_y = clip.y() / clip.w();
  out.pixel = Vec2((ndc_x + 1.0) * 0.5 * viewpoint.width, (1.0 - ndc_y) * 0.5 * viewpoint.height);
  return out;
}

Vec3 unproject(const Viewpoint& viewpoint, const Vec2& pixel, double depth) {
  const double ndc_x = pixel.x() / viewpoint.width * 2.0 - 1.0;
  const double ndc_y = 1.0 - pixel.y() / viewpoint.height * 2.0;
  // clip.w == depth for this projection; x_clip = P00 * x_cam.
  const Vec4 cam(ndc_x * depth / viewpoint.projection(0, 0),
                 ndc_y * depth / viewpoint.projection(1, 1), -depth, 1.0);
  const Vec4 world = viewpoint.view.inverse() * cam;
  return world.head<3>();
}

}  // namespace meshvote
