#include "tpg/scenegen.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>

#include "tpg/serial.hpp"
#include "tpg/threading.hpp"

namespace tpg {

namespace {
constexpr double kPi = 3.14159265358979323846;
// primitive proportions relative to the size radius
constexpr double kCubeHalf = 0.75;
constexpr double kCylRadius = 0.62;
constexpr double kCylHalfHeight = 1.15;
const Vec3 kLightDir = {0.436435780471985, 0.872871560943970, 0.218217890235992};  // normalize(2,4,1)
constexpr float kAmbient = 0.35f;
constexpr float kDiffuse = 0.65f;
}  // namespace

AttributeVocab AttributeVocab::full() {
    AttributeVocab v;
    v.shapes = {"sphere", "cube", "cylinder"};
    v.colors = {
        {"red", {0.90f, 0.10f, 0.10f}},     {"green", {0.10f, 0.75f, 0.15f}},
        {"blue", {0.10f, 0.20f, 0.90f}},    {"yellow", {0.95f, 0.85f, 0.10f}},
        {"orange", {0.95f, 0.50f, 0.10f}},  {"purple", {0.55f, 0.15f, 0.80f}},
        {"cyan", {0.10f, 0.80f, 0.80f}},    {"magenta", {0.90f, 0.15f, 0.65f}},
    };
    v.sizes = {"small", "large"};
    v.size_radius = {0.35, 0.6};
    return v;
}

AttributeVocab AttributeVocab::subset(int n_shapes, int n_colors) const {
    require(n_shapes >= 1 && n_shapes <= static_cast<int>(shapes.size()), "vocab: bad shape count");
    require(n_colors >= 1 && n_colors <= static_cast<int>(colors.size()), "vocab: bad color count");
    AttributeVocab v = *this;
    v.shapes.resize(n_shapes);
    v.colors.resize(n_colors);
    return v;
}

void AttributeVocab::validate() const {
    require(!shapes.empty() && !colors.empty() && !sizes.empty(), "vocab: empty attribute list");
    require(sizes.size() == size_radius.size(), "vocab: size/radius mismatch");
    for (size_t i = 0; i < colors.size(); ++i)
        for (size_t j = i + 1; j < colors.size(); ++j)
            require(colors[i].name != colors[j].name, "vocab: duplicate color name");
}

uint64_t AttributeVocab::hash() const {
    std::string s;
    for (const auto& x : shapes) s += x + ";";
    for (const auto& c : colors) s += c.name + strf(":%.3f,%.3f,%.3f;", c.rgb[0], c.rgb[1], c.rgb[2]);
    for (size_t i = 0; i < sizes.size(); ++i) s += sizes[i] + strf(":%.3f;", size_radius[i]);
    return fnv1a64(s);
}

SceneSpec sample_scene(const AttributeVocab& vocab, uint64_t seed) {
    Rng rng(seed);
    SceneSpec s;
    s.shape = static_cast<int>(rng.below(vocab.shapes.size()));
    s.color = static_cast<int>(rng.below(vocab.colors.size()));
    s.size = static_cast<int>(rng.below(vocab.sizes.size()));
    s.accent = static_cast<int>(rng.below(vocab.colors.size()));
    s.orientation = rng.uniform(0.0, 2.0 * kPi);
    return s;
}

Camera camera_at_azimuth(double azimuth, int image_res, double fov) {
    double elev = kCameraElevationDeg * kPi / 180.0;
    Camera cam;
    cam.position = {kCameraRadius * std::cos(elev) * std::cos(azimuth),
                    kCameraRadius * std::sin(elev),
                    kCameraRadius * std::cos(elev) * std::sin(azimuth)};
    cam.target = {0, 0, 0};
    cam.up = {0, 1, 0};
    cam.fov_y = fov;
    cam.height = cam.width = image_res;
    cam.near_t = kCameraRadius - 1.8;
    cam.far_t = kCameraRadius + 1.8;
    return cam;
}

Camera sample_camera(uint64_t seed, int image_res, double fov) {
    Rng rng(seed);
    return camera_at_azimuth(rng.uniform(0.0, 2.0 * kPi), image_res, fov);
}

namespace {

struct Hit {
    double t;
    Vec3 normal;   // object frame
    double y_obj;  // object-frame height at the hit
};

// orientation-frame intersection helpers; ray already rotated
bool hit_sphere(const Vec3& o, const Vec3& d, double r, Hit* h) {
    double b = dot(o, d);
    double c = dot(o, o) - r * r;
    double disc = b * b - c;
    if (disc < 0) return false;
    double t = -b - std::sqrt(disc);
    if (t < 1e-6) return false;
    Vec3 p = o + d * t;
    h->t = t;
    h->normal = p * (1.0 / r);
    h->y_obj = p.y;
    return true;
}

bool hit_box(const Vec3& o, const Vec3& d, double hx, double hy, double hz, Hit* h) {
    double lo = -1e30, hi = 1e30;
    int axis = 0;
    const double oo[3] = {o.x, o.y, o.z}, dd[3] = {d.x, d.y, d.z}, hh[3] = {hx, hy, hz};
    for (int k = 0; k < 3; ++k) {
        if (std::fabs(dd[k]) < 1e-12) {
            if (std::fabs(oo[k]) > hh[k]) return false;
            continue;
        }
        double ta = (-hh[k] - oo[k]) / dd[k];
        double tb = (hh[k] - oo[k]) / dd[k];
        bool swapped = ta > tb;
        if (swapped) std::swap(ta, tb);
        if (ta > lo) {
            lo = ta;
            axis = k;
        }
        hi = std::min(hi, tb);
        if (lo > hi) return false;
    }
    if (lo < 1e-6) return false;
    Vec3 p = o + d * lo;
    Vec3 n{0, 0, 0};
    double sign = (axis == 0 ? p.x : axis == 1 ? p.y : p.z) > 0 ? 1.0 : -1.0;
    if (axis == 0) n.x = sign;
    if (axis == 1) n.y = sign;
    if (axis == 2) n.z = sign;
    h->t = lo;
    h->normal = n;
    h->y_obj = p.y;
    return true;
}

bool hit_cylinder(const Vec3& o, const Vec3& d, double r, double hh, Hit* h) {
    double best = 1e30;
    Vec3 bn;
    // side
    double a = d.x * d.x + d.z * d.z;
    if (a > 1e-12) {
        double b = o.x * d.x + o.z * d.z;
        double c = o.x * o.x + o.z * o.z - r * r;
        double disc = b * b - a * c;
        if (disc >= 0) {
            double t = (-b - std::sqrt(disc)) / a;
            if (t > 1e-6) {
                double y = o.y + d.y * t;
                if (std::fabs(y) <= hh) {
                    best = t;
                    Vec3 p = o + d * t;
                    bn = normalized({p.x, 0, p.z});
                }
            }
        }
    }
    // caps
    if (std::fabs(d.y) > 1e-12) {
        for (double cap : {hh, -hh}) {
            double t = (cap - o.y) / d.y;
            if (t > 1e-6 && t < best) {
                double x = o.x + d.x * t, z = o.z + d.z * t;
                if (x * x + z * z <= r * r) {
                    best = t;
                    bn = {0, cap > 0 ? 1.0 : -1.0, 0};
                }
            }
        }
    }
    if (best >= 1e30) return false;
    h->t = best;
    h->normal = bn;
    h->y_obj = o.y + d.y * best;
    return true;
}

}  // namespace

ImageF render_scene_analytic(const SceneSpec& spec, const Camera& cam,
                             const AttributeVocab& vocab) {
    require(spec.shape >= 0 && spec.shape < static_cast<int>(vocab.shapes.size()), "spec: bad shape");
    require(spec.color >= 0 && spec.color < static_cast<int>(vocab.colors.size()), "spec: bad color");
    require(spec.size >= 0 && spec.size < static_cast<int>(vocab.sizes.size()), "spec: bad size");
    require(spec.accent >= 0 && spec.accent < static_cast<int>(vocab.colors.size()),
            "spec: bad accent");
    RayBundle rays = generate_rays(cam);
    ImageF img(3, cam.height, cam.width, 1.f);  // white background
    double r = vocab.size_radius[spec.size];
    const std::string& shape = vocab.shapes[spec.shape];
    double cos_o = std::cos(-spec.orientation), sin_o = std::sin(-spec.orientation);
    auto rot = [&](const Vec3& v) {
        return Vec3{v.x * cos_o - v.z * sin_o, v.y, v.x * sin_o + v.z * cos_o};
    };
    double hy = shape == "sphere" ? r : shape == "cube" ? r * kCubeHalf : r * kCylHalfHeight;
    double y_top = hy / 3.0;  // top third of the vertical extent
    const auto& base_rgb = vocab.colors[spec.color].rgb;
    const auto& accent_rgb = vocab.colors[spec.accent].rgb;
    Vec3 light_obj = rot(kLightDir);  // light rotated into the object frame

    size_t plane = img.plane();
    parallel_for(static_cast<int64_t>(plane), [&](int64_t b, int64_t e) {
        for (int64_t px = b; px < e; ++px) {
            Vec3 o = rot(rays.origin);
            Vec3 d = rot(rays.dirs[px]);
            Hit h;
            bool ok = false;
            if (shape == "sphere")
                ok = hit_sphere(o, d, r, &h);
            else if (shape == "cube")
                ok = hit_box(o, d, r * kCubeHalf, r * kCubeHalf, r * kCubeHalf, &h);
            else
                ok = hit_cylinder(o, d, r * kCylRadius, r * kCylHalfHeight, &h);
            if (!ok) continue;
            const auto& albedo = h.y_obj > y_top ? accent_rgb : base_rgb;
            float lambert = kAmbient + kDiffuse * static_cast<float>(std::max(0.0, dot(h.normal, light_obj)));
            for (int c = 0; c < 3; ++c) img.data[c * plane + px] = albedo[c] * lambert;
        }
    });
    return img;
}

std::string full_caption(const SceneSpec& spec, const AttributeVocab& vocab) {
    return "a render of a " + vocab.sizes[spec.size] + " " + vocab.colors[spec.color].name + " " +
           vocab.shapes[spec.shape] + " with a " + vocab.colors[spec.accent].name + " top";
}

std::string make_caption(const SceneSpec& spec, const AttributeVocab& vocab, uint64_t seed,
                         double drop_rate) {
    Rng rng(seed);
    bool drop_size = rng.uniform() < drop_rate;
    bool drop_color = rng.uniform() < drop_rate;
    bool drop_accent = rng.uniform() < drop_rate;
    std::string s = "a render of a";
    if (!drop_size) s += " " + vocab.sizes[spec.size];
    if (!drop_color) s += " " + vocab.colors[spec.color].name;
    s += " " + vocab.shapes[spec.shape];
    if (!drop_accent) s += " with a " + vocab.colors[spec.accent].name + " top";
    return s;
}

namespace {
std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> toks;
    std::istringstream is(text);
    std::string w;
    while (is >> w) toks.push_back(w);
    return toks;
}

int find_name(const std::vector<std::string>& names, const std::string& w) {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == w) return static_cast<int>(i);
    return -1;
}
}  // namespace

std::optional<CaptionAttrs> parse_caption(const std::string& text, const AttributeVocab& vocab) {
    auto toks = tokenize(text);
    if (toks.size() < 5 || toks[0] != "a" || toks[1] != "render" || toks[2] != "of" ||
        toks[3] != "a")
        return std::nullopt;
    size_t i = 4;
    CaptionAttrs out;
    std::vector<std::string> color_names;
    for (const auto& c : vocab.colors) color_names.push_back(c.name);
    if (i < toks.size()) {
        int s = find_name(vocab.sizes, toks[i]);
        if (s >= 0) {
            out.size = s;
            ++i;
        }
    }
    if (i < toks.size()) {
        int c = find_name(color_names, toks[i]);
        if (c >= 0) {
            out.color = c;
            ++i;
        }
    }
    if (i >= toks.size()) return std::nullopt;
    out.shape = find_name(vocab.shapes, toks[i]);
    if (out.shape < 0) return std::nullopt;
    ++i;
    if (i == toks.size()) return out;
    if (i + 4 != toks.size() || toks[i] != "with" || toks[i + 1] != "a" || toks[i + 3] != "top")
        return std::nullopt;
    out.accent = find_name(color_names, toks[i + 2]);
    if (out.accent < 0) return std::nullopt;
    return out;
}

std::string build_dataset(const AttributeVocab& vocab, int n_images, uint64_t seed,
                          const std::string& out_dir, int image_res, double drop_rate) {
    require(n_images >= 0, "build_dataset: negative count");
    vocab.validate();
    make_dirs(out_dir + "/images");
    std::vector<DatasetRecord> records(n_images);
    std::mutex err_mu;
    std::string first_err;
    parallel_for_chunk(n_images, 64, [&](int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            try {
                uint64_t item_seed = seed_split(seed, "scenegen", static_cast<uint64_t>(i));
                SceneSpec spec = sample_scene(vocab, seed_split(item_seed, "spec", 0));
                Camera cam = sample_camera(seed_split(item_seed, "camera", 0), image_res);
                ImageF img = render_scene_analytic(spec, cam, vocab);
                std::string rel = strf("images/%06d.png", static_cast<int>(i));
                write_png(out_dir + "/" + rel, to_u8(img));
                DatasetRecord& rec = records[i];
                rec.image_path = rel;
                rec.caption = make_caption(spec, vocab, seed_split(item_seed, "caption", 0), drop_rate);
                rec.spec = spec;
                rec.cam_azimuth = std::atan2(cam.position.z, cam.position.x);
                rec.seed = item_seed;
            } catch (const std::exception& ex) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (first_err.empty())
                    first_err = strf("build_dataset: item %d failed: %s", static_cast<int>(i),
                                     ex.what());
            }
        }
    });
    require(first_err.empty(), first_err);

    std::string manifest;
    for (int i = 0; i < n_images; ++i) {
        const auto& r = records[i];
        nlohmann::json j;
        j["image_path"] = r.image_path;
        j["caption"] = r.caption;
        j["spec"] = {{"shape", r.spec.shape},
                     {"color", r.spec.color},
                     {"size", r.spec.size},
                     {"accent", r.spec.accent},
                     {"orientation", r.spec.orientation}};
        j["camera"] = {{"azimuth", r.cam_azimuth},
                       {"radius", kCameraRadius},
                       {"elevation_deg", kCameraElevationDeg},
                       {"res", image_res}};
        j["seed"] = r.seed;
        manifest += j.dump() + "\n";
    }
    std::string path = out_dir + "/manifest.jsonl";
    write_text_file_atomic(path, manifest);
    return path;
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    DatasetManifest m;
    std::istringstream is(read_text_file(manifest_path));
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        DatasetRecord r;
        r.image_path = j.at("image_path").get<std::string>();
        r.caption = j.at("caption").get<std::string>();
        r.spec.shape = j.at("spec").at("shape").get<int>();
        r.spec.color = j.at("spec").at("color").get<int>();
        r.spec.size = j.at("spec").at("size").get<int>();
        r.spec.accent = j.at("spec").at("accent").get<int>();
        r.spec.orientation = j.at("spec").at("orientation").get<double>();
        r.cam_azimuth = j.at("camera").at("azimuth").get<double>();
        m.image_res = j.at("camera").at("res").get<int>();
        r.seed = j.at("seed").get<uint64_t>();
        m.records.push_back(std::move(r));
    }
    return m;
}

}  // namespace tpg
