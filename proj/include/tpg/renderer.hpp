#pragma once

#include <cstdint>
#include <vector>

#include "tpg/camera.hpp"
#include "tpg/image.hpp"
#include "tpg/triplane.hpp"

namespace tpg {

// Ordered samples along one ray, indexed from the camera outwards.
struct RaySamples {
    std::vector<float> t;      // strictly increasing ray parameters
    std::vector<float> delta;  // spacings; delta.back() extends to the far bound

    void validate() const;
};

// Two-pass placement: stratified samples over [near, far], then optional
// inverse-CDF draws over the piecewise-constant density the coarse
// compositing weights induce on the strata. Pass coarse_weights == nullptr
// for the coarse pass; both passes replay the same coarse positions for a
// given seed so the merged result contains them.
RaySamples sample_points(double near, double far, int n_coarse, int n_fine,
                         const std::vector<float>* coarse_weights, uint64_t seed,
                         bool mid_bin = false);

// Volumetric accumulation: sigma = sigmoid(d), a = 1 - exp(-sigma * delta),
// out_c = sum_i v_ic a_i prod_{j<i}(1 - a_j) + T_final * bg_c, opacity = 1 - T_final.
// `values` is (n, channels) row-major; bg may be nullptr for a zero background.
void composite_channels(int n, int channels, const float* values, const float* d,
                        const float* delta, const float* bg, float* out, float* opacity);

// RGB convenience wrapper matching the three-channel accumulation.
struct CompositeOut {
    float rgb[3];
    float opacity;
};
CompositeOut composite(const std::vector<std::array<float, 3>>& colors,
                       const std::vector<float>& pseudo_sdfs, const std::vector<float>& spacings);

// Reverse-mode of composite_channels. dout is (channels), dopacity may be 0.
// Accumulates into dvalues (n, channels), dd (n), ddelta (n) (any may be null).
void composite_backward(int n, int channels, const float* values, const float* d,
                        const float* delta, const float* bg, const float* dout, float dopacity,
                        float* dvalues, float* dd, float* ddelta);

// Sample counts; ray bounds come from the camera.
struct RenderConfig {
    int n_coarse = 32, n_fine = 32;
    bool mid_bin = false;  // deterministic mid-bin stratification
};

struct RenderResult {
    ImageF rgba;               // (4, H, W): composited rgb over zero background + opacity
    ImageF features;           // (3*n_feat, H, W), present when requested
    std::vector<float> depth;  // H*W, present when requested; empty rays hold far_t
};

RenderResult render(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                    const RenderConfig& cfg, uint64_t seed);
// Same compositing weights, accumulating triplane features instead of color
// (densities still come through the decoder).
RenderResult render_features(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                             const RenderConfig& cfg, uint64_t seed);
RenderResult render_depth(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                          const RenderConfig& cfg, uint64_t seed);

// White-over-background compose of an RGBA render.
ImageF compose_white(const ImageF& rgba);

// --- training path -------------------------------------------------------
// One render with everything the backward pass needs. Outputs a white-
// composited RGB image and a zero-background feature image that share
// per-sample weights, so gradients combine through one compositing pass.
struct RenderCtx {
    int H = 0, W = 0;
    int n_feat = 0, grid_h = 0, grid_w = 0;
    Vec3 origin;
    std::vector<Vec3> dirs;
    std::vector<int> ray_offset;       // H*W+1
    std::vector<float> t, delta;       // per sample
    std::vector<float> feat;           // (S, 3n)
    std::vector<float> sigma, alpha;   // per sample
    DecodeCtx dec_ctx;
    int samples() const { return static_cast<int>(t.size()); }
};

void render_train(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                  const RenderConfig& cfg, uint64_t seed, ImageF* rgb_white, ImageF* feat_img,
                  RenderCtx* ctx);

// d_rgb: (3,H,W) grads on the white-composited image; d_feat: optional
// (3n,H,W) grads on the feature image. Accumulates into dplanes (triplane
// layout) and decoder gradient buffers.
void render_train_backward(const TriplaneField& T, const FieldDecoder& dec, const RenderCtx& ctx,
                           const ImageF& d_rgb, const ImageF* d_feat, float* dplanes,
                           std::vector<std::vector<float>>& dweights,
                           std::vector<std::vector<float>>& dbiases);

}  // namespace tpg
