#pragma once

#include <optional>
#include <vector>

#include "canonmap/mesh.hpp"

namespace canonmap {

struct ImageSize {
    int height = 512;
    int width = 512;
    friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Continuous pixel coordinates: pixel (r, c) covers [r, r+1) x [c, c+1).
struct PixelCoord {
    double row = 0.0;
    double col = 0.0;
};

// Pinhole camera. Camera frame: x right, y up, z towards the viewer, so a
// point in front of the camera has positive depth along the viewing axis.
class Camera {
public:
    // Throws InvalidArgument if position == look_at or fov_y is outside (0, pi).
    Camera(Vec3 position, Vec3 look_at, Vec3 up, double fov_y, ImageSize size);

    const Vec3& position() const { return position_; }
    const Vec3& look_at() const { return look_at_; }
    const Vec3& up() const { return up_; }
    double fov_y() const { return fov_y_; }
    ImageSize image_size() const { return size_; }

    const Vec3& right_axis() const { return right_; }
    const Vec3& up_axis() const { return true_up_; }
    const Vec3& forward_axis() const { return forward_; }
    double focal_px() const { return focal_; }

    // Depth of p along the viewing direction (positive in front).
    double depth(const Vec3& p) const { return (p - position_).dot(forward_); }
    // World direction to camera-frame components.
    Vec3 to_camera(const Vec3& dir) const;
    // Projection of a point with positive depth; nullopt behind the camera.
    std::optional<PixelCoord> project(const Vec3& p) const;

private:
    Vec3 position_, look_at_, up_;
    double fov_y_;
    ImageSize size_;
    Vec3 forward_, right_, true_up_;
    double focal_;
};

inline constexpr double kElevationsDeg[4] = {-30.0, 0.0, 20.0, 45.0};

struct ViewpointOptions {
    ImageSize size{};
    // Fraction of the image half-height covered by the bounding sphere.
    double fill = 0.8;
};

// n cameras on a sphere of radius radius_scale * bounding radius around the
// centroid. Azimuths are uniform (view 0 on the +z axis), elevations cycle
// through kElevationsDeg; n == 1 gives the single frontal camera.
std::vector<Camera> sample_viewpoints(const Mesh& mesh, int n, double radius_scale,
                                      const ViewpointOptions& options = {});

// Field of view that frames a bounding sphere seen from `distance`.
double framing_fov(double bounding_radius, double distance, double fill);

}  // namespace canonmap
