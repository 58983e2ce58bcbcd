#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tpg/camera.hpp"
#include "tpg/image.hpp"
#include "tpg/rng.hpp"

namespace tpg {

// Fixed viewpoint distribution of the synthetic corpus.
constexpr double kCameraRadius = 2.34;
constexpr double kCameraElevationDeg = 40.0;
constexpr double kDefaultFov = 0.7;

struct ColorDef {
    std::string name;
    std::array<float, 3> rgb;
};

// Closed attribute vocabularies plus the caption template
// "a render of a [size] [color] [shape] with a [accent] top".
struct AttributeVocab {
    std::vector<std::string> shapes;
    std::vector<ColorDef> colors;
    std::vector<std::string> sizes;
    std::vector<double> size_radius;

    static AttributeVocab full();
    // Restricted vocabulary (first n entries each); accent shares the color set.
    AttributeVocab subset(int n_shapes, int n_colors) const;
    void validate() const;
    uint64_t hash() const;
};

struct SceneSpec {
    int shape = 0, color = 0, size = 0, accent = 0;
    double orientation = 0;  // radians about the vertical axis
};

// Attributes mentioned by a caption; -1 marks a dropped slot.
struct CaptionAttrs {
    int shape = -1, color = -1, size = -1, accent = -1;
};

SceneSpec sample_scene(const AttributeVocab& vocab, uint64_t seed);

// Camera on the fixed-radius / fixed-elevation ring looking at the origin,
// azimuth uniform in [0, 2pi).
Camera sample_camera(uint64_t seed, int image_res = 64, double fov = kDefaultFov);
Camera camera_at_azimuth(double azimuth, int image_res = 64, double fov = kDefaultFov);

// Exact ray-primitive intersections, fixed-light Lambert shading over a white
// background; the ground-truth image source for the whole pipeline.
ImageF render_scene_analytic(const SceneSpec& spec, const Camera& cam, const AttributeVocab& vocab);

std::string make_caption(const SceneSpec& spec, const AttributeVocab& vocab, uint64_t seed,
                         double drop_rate = 0.2);
std::string full_caption(const SceneSpec& spec, const AttributeVocab& vocab);
std::optional<CaptionAttrs> parse_caption(const std::string& text, const AttributeVocab& vocab);

struct DatasetRecord {
    std::string image_path;
    std::string caption;
    SceneSpec spec;
    double cam_azimuth = 0;
    uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<DatasetRecord> records;
    int image_res = 64;
};

// Writes n (image, caption, spec, camera) records under out_dir with a JSONL
// manifest. Per-item seeds derive from the master seed, so generation is
// order-independent and reproducible for any worker count.
std::string build_dataset(const AttributeVocab& vocab, int n_images, uint64_t seed,
                          const std::string& out_dir, int image_res = 64, double drop_rate = 0.2);

DatasetManifest load_manifest(const std::string& manifest_path);

}  // namespace tpg
