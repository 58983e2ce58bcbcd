#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tpg/common.hpp"
#include "tpg/rng.hpp"

namespace tpg {

// Three orthogonal 2D feature grids concatenated channelwise: (3*n_feat, h, w)
// in (channel, row, col) order. The field covers the cube [-1,1]^3; plane k
// holds the (xy, xz, yz) projection for k = 0, 1, 2.
struct TriplaneField {
    int n_feat = 0, h = 0, w = 0;
    std::vector<float> planes;

    TriplaneField() = default;
    TriplaneField(int n_feat_, int h_, int w_, float fill = 0.f)
        : n_feat(n_feat_), h(h_), w(w_),
          planes(static_cast<size_t>(3) * n_feat_ * h_ * w_, fill) {}

    int channels() const { return 3 * n_feat; }
    size_t plane_size() const { return static_cast<size_t>(h) * w; }
    float& at(int ch, int row, int col) { return planes[(static_cast<size_t>(ch) * h + row) * w + col]; }
    float at(int ch, int row, int col) const {
        return planes[(static_cast<size_t>(ch) * h + row) * w + col];
    }
    void validate() const;
};

// Bilinear footprint of one query on one plane: four texel offsets (within a
// single channel's grid) plus their weights. Texel centers sit at half-integer
// pixel positions; out-of-range corners clamp to the edge.
struct BilinearTap {
    size_t i00, i01, i10, i11;
    float w00, w01, w10, w11;
    // weight derivatives w.r.t. the continuous pixel coords (for d/dx)
    float dfx, dfy;  // scale factors from world units to pixels
    float gx00, gx01, gx10, gx11;  // d w / d fx
    float gy00, gy01, gy10, gy11;  // d w / d fy
};

// Footprints of a 3D point on the three planes. Computing them once lets the
// renderer reuse the taps for forward, feature access, and backward.
std::array<BilinearTap, 3> triplane_taps(int h, int w, float x, float y, float z);

// Feature lookup: concatenation, in (xy, xz, yz) order, of the bilinear
// interpolation of each plane at the projection of p. Rejects points outside
// the cube.
std::vector<float> sample_feature(const TriplaneField& T, float x, float y, float z);

// No-bounds-check core used by the renderer after culling.
void sample_feature_taps(const TriplaneField& T, const std::array<BilinearTap, 3>& taps, float* out);

// Accumulates d(loss)/d(planes) given d(loss)/d(feature).
void sample_feature_backward(const std::array<BilinearTap, 3>& taps, int n_feat, int h, int w,
                             const float* dfeat, float* dplanes);
// d(feature)/d(position): 3n x 3 Jacobian product, dpos += J^T dfeat.
void sample_feature_pos_grad(const TriplaneField& T, const std::array<BilinearTap, 3>& taps,
                             const float* dfeat, float dpos[3]);

// Small MLP turning a 3n feature into (pseudo-SDF d, albedo rgb). Hidden
// layers use leaky ReLU; the three color outputs get a sigmoid, d is raw.
struct FieldDecoder {
    int in_dim = 0, hidden = 32, depth = 2;
    // weights[l] has shape (out, in) row-major; layer dims:
    // in_dim -> hidden -> ... -> hidden -> 4
    std::vector<std::vector<float>> weights, biases;

    static FieldDecoder init(int in_dim, int hidden, int depth, Rng& rng);
    int layer_in(int l) const { return l == 0 ? in_dim : hidden; }
    int layer_out(int l) const { return l == depth ? 4 : hidden; }
    size_t param_count() const;
    void validate() const;
};

struct DecodeOut {
    float d;
    float rgb[3];
};

DecodeOut decode(const FieldDecoder& dec, const std::vector<float>& feature);

// Batched decode with stored pre-activations so the renderer can backprop.
struct DecodeCtx {
    int count = 0;
    std::vector<std::vector<float>> acts;  // acts[0]=input features, acts[l+1]=post-activation of layer l
    std::vector<float> raw_out;            // (count, 4) pre-sigmoid outputs
};

// features: (count, in_dim) row-major; out: (count, 4) as (d, r, g, b) post-activation.
void decode_batch(const FieldDecoder& dec, const float* features, int count, float* out,
                  DecodeCtx* ctx);
// dout: (count, 4) gradients w.r.t. post-activation outputs. Accumulates into
// dweights/dbiases (same shapes as the decoder) and optionally dfeatures.
void decode_backward(const FieldDecoder& dec, const DecodeCtx& ctx, const float* dout,
                     std::vector<std::vector<float>>& dweights,
                     std::vector<std::vector<float>>& dbiases, float* dfeatures);

// Per-channel statistics over a triplane dataset plus the fixed diffusion
// pre-processing constants (scale 1/16, clamp 1).
struct TriplaneStats {
    std::vector<double> mean, stdev;  // 3*n_feat each
    double scale = 1.0 / 16.0;
    double clamp = 1.0;

    int channels() const { return static_cast<int>(mean.size()); }
};

TriplaneStats compute_stats(const std::vector<TriplaneField>& dataset);
// Streaming variant for datasets too large to hold in memory.
struct StatsAccumulator {
    std::vector<double> sum, sumsq;
    uint64_t count_per_channel = 0;
    void add(const TriplaneField& T);
    TriplaneStats finish() const;
};

TriplaneField normalize_triplane(const TriplaneField& T, const TriplaneStats& stats);
TriplaneField denormalize_triplane(const TriplaneField& Tn, const TriplaneStats& stats);

// Binary triplane file: magic "TRIP", version, n_feat, h, w, then
// 3*n_feat*h*w f32 LE in (channel, row, col) order.
void save_triplane(const std::string& path, const TriplaneField& T);
TriplaneField load_triplane(const std::string& path);

void save_stats(const std::string& path, const TriplaneStats& stats);
TriplaneStats load_stats(const std::string& path);

}  // namespace tpg
