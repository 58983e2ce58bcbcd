#pragma once

#include <vector>

#include "tpg/common.hpp"

namespace tpg {

// Pinhole camera looking at `target`; vertical field of view in radians.
struct Camera {
    Vec3 position;
    Vec3 target{0, 0, 0};
    Vec3 up{0, 1, 0};
    double fov_y = 0.7;
    int height = 64, width = 64;
    double near_t = 0.5, far_t = 4.2;

    void validate() const;
};

struct CameraBasis {
    Vec3 forward, right, cam_up;
};

CameraBasis camera_basis(const Camera& cam);

// One ray per pixel through the pixel center; directions unit length, row-major.
struct RayBundle {
    Vec3 origin;
    std::vector<Vec3> dirs;
    int height = 0, width = 0;
};

RayBundle generate_rays(const Camera& cam);

// Entry/exit parameters of a ray against the cube [-1,1]^3 clipped to
// [tmin, tmax]; returns false when the ray misses.
bool clip_ray_to_cube(const Vec3& origin, const Vec3& dir, double tmin, double tmax, double* t0,
                      double* t1);

}  // namespace tpg
