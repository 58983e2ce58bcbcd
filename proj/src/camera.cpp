#include "tpg/camera.hpp"

#include <cmath>

namespace tpg {

void Camera::validate() const {
    require(fov_y > 0 && fov_y < 3.141592653589793, "camera: fov out of (0, pi)");
    require(near_t > 0 && near_t < far_t, "camera: need 0 < near < far");
    require(height >= 1 && width >= 1, "camera: empty image");
    Vec3 f = target - position;
    require(norm(f) > 1e-9, "camera: position equals target");
    require(norm(cross(normalized(f), up)) > 1e-8, "camera: up parallel to view direction");
}

CameraBasis camera_basis(const Camera& cam) {
    cam.validate();
    Vec3 f = normalized(cam.target - cam.position);
    Vec3 r = normalized(cross(f, cam.up));
    Vec3 u = cross(r, f);
    return {f, r, u};
}

RayBundle generate_rays(const Camera& cam) {
    CameraBasis b = camera_basis(cam);
    RayBundle rb;
    rb.origin = cam.position;
    rb.height = cam.height;
    rb.width = cam.width;
    rb.dirs.resize(static_cast<size_t>(cam.height) * cam.width);
    double tan_half = std::tan(cam.fov_y * 0.5);
    double aspect = static_cast<double>(cam.width) / cam.height;
    for (int i = 0; i < cam.height; ++i) {
        double ndc_y = (1.0 - 2.0 * (i + 0.5) / cam.height) * tan_half;
        for (int j = 0; j < cam.width; ++j) {
            double ndc_x = (2.0 * (j + 0.5) / cam.width - 1.0) * tan_half * aspect;
            Vec3 d = b.right * ndc_x + b.cam_up * ndc_y + b.forward;
            rb.dirs[static_cast<size_t>(i) * cam.width + j] = normalized(d);
        }
    }
    return rb;
}

bool clip_ray_to_cube(const Vec3& origin, const Vec3& dir, double tmin, double tmax, double* t0,
                      double* t1) {
    double lo = tmin, hi = tmax;
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    for (int k = 0; k < 3; ++k) {
        if (std::fabs(d[k]) < 1e-12) {
            if (o[k] < -1.0 || o[k] > 1.0) return false;
            continue;
        }
        double ta = (-1.0 - o[k]) / d[k];
        double tb = (1.0 - o[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        lo = std::max(lo, ta);
        hi = std::min(hi, tb);
        if (lo >= hi) return false;
    }
    *t0 = lo;
    *t1 = hi;
    return true;
}

}  // namespace tpg
