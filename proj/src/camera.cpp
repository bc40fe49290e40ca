#include "canonmap/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "canonmap/error.hpp"

namespace canonmap {

Camera::Camera(Vec3 position, Vec3 look_at, Vec3 up, double fov_y, ImageSize size)
    : position_(std::move(position)), look_at_(std::move(look_at)), up_(std::move(up)), fov_y_(fov_y), size_(size) {
    if ((look_at_ - position_).norm() <= 0.0) fail(ErrorKind::InvalidArgument, "camera position equals look_at");
    if (!(fov_y_ > 0.0 && fov_y_ < std::numbers::pi)) fail(ErrorKind::InvalidArgument, "fov_y must lie in (0, pi)");
    if (size_.height <= 0 || size_.width <= 0) fail(ErrorKind::InvalidArgument, "image size must be positive");
    forward_ = (look_at_ - position_).normalized();
    right_ = forward_.cross(up_);
    if (right_.norm() < 1e-12) fail(ErrorKind::InvalidArgument, "camera up vector is parallel to the view direction");
    right_.normalize();
    true_up_ = right_.cross(forward_);
    focal_ = 0.5 * size_.height / std::tan(0.5 * fov_y_);
}

Vec3 Camera::to_camera(const Vec3& dir) const {
    return {dir.dot(right_), dir.dot(true_up_), -dir.dot(forward_)};
}

std::optional<PixelCoord> Camera::project(const Vec3& p) const {
    const Vec3 d = p - position_;
    const double z = d.dot(forward_);
    if (z <= 0.0) return std::nullopt;
    return PixelCoord{0.5 * size_.height - focal_ * d.dot(true_up_) / z,
                      0.5 * size_.width + focal_ * d.dot(right_) / z};
}

double framing_fov(double bounding_radius, double distance, double fill) {
    const double half_angle = std::asin(std::min(bounding_radius / distance, 1.0 - 1e-9));
    return 2.0 * std::atan(std::tan(half_angle) / fill);
}

std::vector<Camera> sample_viewpoints(const Mesh& mesh, int n, double radius_scale, const ViewpointOptions& options) {
    if (n < 1) fail(ErrorKind::InvalidArgument, "viewpoint count must be >= 1");
    if (!(radius_scale > 1.0)) fail(ErrorKind::InvalidArgument, "radius_scale must exceed 1 (camera outside the mesh)");
    const Vec3 center = mesh.centroid();
    const double radius = mesh.bounding_radius();
    const double distance = radius_scale * radius;
    const double fov = framing_fov(radius, distance, options.fill);

    std::vector<Camera> cameras;
    cameras.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double az = 2.0 * std::numbers::pi * i / n;
        const double el = n == 1 ? 0.0 : kElevationsDeg[i % 4] * std::numbers::pi / 180.0;
        const Vec3 dir(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
        cameras.emplace_back(center + distance * dir, center, Vec3(0, 1, 0), fov, options.size);
    }
    return cameras;
}

}  // namespace canonmap
