#include "tpg/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tpg/rng.hpp"
#include "tpg/threading.hpp"

namespace tpg {

void RaySamples::validate() const {
    require(t.size() == delta.size(), "ray samples: t/delta size mismatch");
    for (size_t i = 0; i + 1 < t.size(); ++i)
        require(t[i] < t[i + 1], "ray samples: positions not strictly increasing");
    for (float d : delta) require(d > 0, "ray samples: non-positive spacing");
}

namespace {
inline uint64_t mix2(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ (b * 0x9e3779b97f4a7c15ull + 1)); }
}  // namespace

RaySamples sample_points(double near, double far, int n_coarse, int n_fine,
                         const std::vector<float>* coarse_weights, uint64_t seed, bool mid_bin) {
    require(near < far, "sample_points: near must be < far");
    require(n_coarse >= 1, "sample_points: n_coarse must be >= 1");
    require((n_fine > 0) == (coarse_weights != nullptr),
            "sample_points: coarse_weights present iff fine pass");
    if (coarse_weights)
        require(static_cast<int>(coarse_weights->size()) == n_coarse,
                "sample_points: weight count mismatch");

    double bin = (far - near) / n_coarse;
    std::vector<float> ts;
    ts.reserve(n_coarse + n_fine);
    Rng coarse_rng(mix2(seed, 0));
    for (int k = 0; k < n_coarse; ++k) {
        double u = mid_bin ? 0.5 : coarse_rng.uniform();
        ts.push_back(static_cast<float>(near + (k + u) * bin));
    }
    if (coarse_weights) {
        // piecewise-constant density over the strata, small floor keeps the
        // CDF valid when all weights vanish
        std::vector<double> cum(n_coarse + 1, 0.0);
        for (int k = 0; k < n_coarse; ++k)
            cum[k + 1] = cum[k] + std::max(0.f, (*coarse_weights)[k]) + 1e-5;
        Rng fine_rng(mix2(seed, 1));
        std::vector<float> fine(n_fine);
        for (int i = 0; i < n_fine; ++i) {
            double u = (mid_bin ? (i + 0.5) / n_fine : fine_rng.uniform()) * cum[n_coarse];
            int k = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()) - 1;
            k = std::clamp(k, 0, n_coarse - 1);
            double frac = (u - cum[k]) / (cum[k + 1] - cum[k]);
            fine[i] = static_cast<float>(near + (k + frac) * bin);
        }
        std::sort(fine.begin(), fine.end());
        std::vector<float> merged(ts.size() + fine.size());
        std::merge(ts.begin(), ts.end(), fine.begin(), fine.end(), merged.begin());
        ts.swap(merged);
    }
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    RaySamples out;
    out.t = ts;
    out.delta.resize(ts.size());
    for (size_t i = 0; i + 1 < ts.size(); ++i) out.delta[i] = ts[i + 1] - ts[i];
    if (!ts.empty()) out.delta.back() = static_cast<float>(far) - ts.back();
    // guard against a final sample sitting exactly on the far bound
    if (!out.delta.empty() && out.delta.back() <= 0) out.delta.back() = 1e-6f;
    return out;
}

void composite_channels(int n, int channels, const float* values, const float* d,
                        const float* delta, const float* bg, float* out, float* opacity) {
    for (int c = 0; c < channels; ++c) out[c] = 0;
    float trans = 1.f;
    for (int i = 0; i < n; ++i) {
        float sigma = 1.f / (1.f + std::exp(-d[i]));
        float a = 1.f - std::exp(-sigma * delta[i]);
        float w = a * trans;
        const float* v = values + static_cast<size_t>(i) * channels;
        for (int c = 0; c < channels; ++c) out[c] += w * v[c];
        trans *= 1.f - a;
    }
    if (bg)
        for (int c = 0; c < channels; ++c) out[c] += trans * bg[c];
    if (opacity) *opacity = 1.f - trans;
}

CompositeOut composite(const std::vector<std::array<float, 3>>& colors,
                       const std::vector<float>& pseudo_sdfs, const std::vector<float>& spacings) {
    require(colors.size() == pseudo_sdfs.size() && colors.size() == spacings.size(),
            "composite: input lists must share length");
    CompositeOut r{};
    composite_channels(static_cast<int>(colors.size()), 3,
                       colors.empty() ? nullptr : colors[0].data(), pseudo_sdfs.data(),
                       spacings.data(), nullptr, r.rgb, &r.opacity);
    return r;
}

void composite_backward(int n, int channels, const float* values, const float* d,
                        const float* delta, const float* bg, const float* dout, float dopacity,
                        float* dvalues, float* dd, float* ddelta) {
    // recompute forward internals
    std::vector<float> sigma(n), a(n), trans(n + 1);
    trans[0] = 1.f;
    for (int i = 0; i < n; ++i) {
        sigma[i] = 1.f / (1.f + std::exp(-d[i]));
        a[i] = 1.f - std::exp(-sigma[i] * delta[i]);
        trans[i + 1] = trans[i] * (1.f - a[i]);
    }
    // suffix[i] = sum_{k>i} w_k (dout . v_k) + T_N (dout . bg) - dopacity * T_N
    float tail = -dopacity * trans[n];
    if (bg)
        for (int c = 0; c < channels; ++c) tail += trans[n] * bg[c] * dout[c];
    for (int i = n - 1; i >= 0; --i) {
        const float* v = values + static_cast<size_t>(i) * channels;
        float gv = 0;
        for (int c = 0; c < channels; ++c) gv += dout[c] * v[c];
        float w = a[i] * trans[i];
        if (dvalues) {
            float* dv = dvalues + static_cast<size_t>(i) * channels;
            for (int c = 0; c < channels; ++c) dv[c] += w * dout[c];
        }
        float one_m_a = std::max(1.f - a[i], 1e-12f);
        float da = trans[i] * gv - tail / one_m_a;
        float dsig = da * delta[i] * (1.f - a[i]);
        if (dd) dd[i] += dsig * sigma[i] * (1.f - sigma[i]);
        if (ddelta) ddelta[i] += da * sigma[i] * (1.f - a[i]);
        tail += w * gv;
    }
}

namespace {

// Coarse placement shared by the public op and the image engine.
void stratified_ts(double t0, double t1, int n, uint64_t seed, bool mid_bin, float* out) {
    double bin = (t1 - t0) / n;
    Rng rng(mix2(seed, 0));
    for (int k = 0; k < n; ++k) {
        double u = mid_bin ? 0.5 : rng.uniform();
        out[k] = static_cast<float>(t0 + (k + u) * bin);
    }
}

struct EngineRequest {
    bool want_feat = false;
    bool want_depth = false;
    bool white_rgb = false;  // fold a white background into the rgb output
    bool keep_ctx = false;
};

void render_engine(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                   const RenderConfig& cfg, uint64_t seed, const EngineRequest& req, ImageF* rgb,
                   std::vector<float>* alpha, ImageF* feat_img, std::vector<float>* depth,
                   RenderCtx* ctx) {
    require(cfg.n_coarse >= 1 && cfg.n_fine >= 0, "render: bad sample counts");
    
    T.validate();
    dec.validate();
    require(dec.in_dim == T.channels(), "render: decoder input dim != triplane channels");
    RayBundle rays = generate_rays(cam);
    int n_px = cam.height * cam.width;
    int nf3 = T.channels();

    // pass A: clip rays, coarse sample positions
    std::vector<double> clip0(n_px), clip1(n_px);
    std::vector<uint8_t> hit(n_px, 0);
    std::vector<float> coarse_t(static_cast<size_t>(n_px) * cfg.n_coarse);
    parallel_for(n_px, [&](int64_t b, int64_t e) {
        for (int64_t r = b; r < e; ++r) {
            double t0, t1;
            if (clip_ray_to_cube(rays.origin, rays.dirs[r], cam.near_t, cam.far_t, &t0, &t1)) {
                hit[r] = 1;
                clip0[r] = t0;
                clip1[r] = t1;
                stratified_ts(t0, t1, cfg.n_coarse, mix2(seed, r), cfg.mid_bin,
                              coarse_t.data() + r * cfg.n_coarse);
            }
        }
    });

    // pass B: coarse densities -> per-ray weights
    std::vector<float> coarse_w;
    if (cfg.n_fine > 0) {
        std::vector<float> cfeat(static_cast<size_t>(n_px) * cfg.n_coarse * nf3);
        std::vector<float> cout(static_cast<size_t>(n_px) * cfg.n_coarse * 4);
        parallel_for(n_px, [&](int64_t b, int64_t e) {
            for (int64_t r = b; r < e; ++r) {
                if (!hit[r]) continue;
                for (int k = 0; k < cfg.n_coarse; ++k) {
                    double tt = coarse_t[r * cfg.n_coarse + k];
                    Vec3 p = rays.origin + rays.dirs[r] * tt;
                    auto taps = triplane_taps(T.h, T.w, static_cast<float>(p.x),
                                              static_cast<float>(p.y), static_cast<float>(p.z));
                    sample_feature_taps(T, taps, cfeat.data() + (r * cfg.n_coarse + k) * nf3);
                }
                decode_batch(dec, cfeat.data() + r * cfg.n_coarse * static_cast<size_t>(nf3),
                             cfg.n_coarse, cout.data() + r * cfg.n_coarse * 4, nullptr);
            }
        });
        coarse_w.assign(static_cast<size_t>(n_px) * cfg.n_coarse, 0.f);
        parallel_for(n_px, [&](int64_t b, int64_t e) {
            for (int64_t r = b; r < e; ++r) {
                if (!hit[r]) continue;
                float trans = 1.f;
                double bin = (clip1[r] - clip0[r]) / cfg.n_coarse;
                for (int k = 0; k < cfg.n_coarse; ++k) {
                    float dval = cout[(r * cfg.n_coarse + k) * 4];
                    float sg = 1.f / (1.f + std::exp(-dval));
                    // stratum width as spacing for the placement density
                    float a = 1.f - std::exp(-sg * static_cast<float>(bin));
                    coarse_w[r * cfg.n_coarse + k] = a * trans;
                    trans *= 1.f - a;
                }
            }
        });
    }

    // pass C: fine draws, merge, final per-ray sample lists
    int per_ray = cfg.n_coarse + cfg.n_fine;
    std::vector<int> offs(n_px + 1, 0);
    for (int r = 0; r < n_px; ++r) offs[r + 1] = offs[r] + (hit[r] ? per_ray : 0);
    int S = offs[n_px];
    std::vector<float> ts(S), deltas(S);
    parallel_for(n_px, [&](int64_t b, int64_t e) {
        std::vector<float> fine(cfg.n_fine);
        for (int64_t r = b; r < e; ++r) {
            if (!hit[r]) continue;
            float* tr = ts.data() + offs[r];
            const float* ct = coarse_t.data() + r * cfg.n_coarse;
            if (cfg.n_fine > 0) {
                double bin = (clip1[r] - clip0[r]) / cfg.n_coarse;
                std::vector<double> cum(cfg.n_coarse + 1, 0.0);
                for (int k = 0; k < cfg.n_coarse; ++k)
                    cum[k + 1] = cum[k] + std::max(0.f, coarse_w[r * cfg.n_coarse + k]) + 1e-5;
                Rng rng(mix2(mix2(seed, r), 1));
                for (int i = 0; i < cfg.n_fine; ++i) {
                    double u = (cfg.mid_bin ? (i + 0.5) / cfg.n_fine : rng.uniform()) * cum[cfg.n_coarse];
                    int k = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) -
                                             cum.begin()) - 1;
                    k = std::clamp(k, 0, cfg.n_coarse - 1);
                    double frac = (u - cum[k]) / (cum[k + 1] - cum[k]);
                    fine[i] = static_cast<float>(clip0[r] + (k + frac) * bin);
                }
                std::sort(fine.begin(), fine.end());
                std::merge(ct, ct + cfg.n_coarse, fine.begin(), fine.end(), tr);
            } else {
                std::copy(ct, ct + cfg.n_coarse, tr);
            }
            float* dr = deltas.data() + offs[r];
            for (int i = 0; i + 1 < per_ray; ++i) dr[i] = tr[i + 1] - tr[i];
            dr[per_ray - 1] = std::max(static_cast<float>(clip1[r]) - tr[per_ray - 1], 0.f);
        }
    });

    // pass D: features + decode for the merged samples
    std::vector<float> feat(static_cast<size_t>(S) * nf3);
    parallel_for(n_px, [&](int64_t b, int64_t e) {
        for (int64_t r = b; r < e; ++r) {
            for (int i = offs[r]; i < offs[r + 1]; ++i) {
                Vec3 p = rays.origin + rays.dirs[r] * static_cast<double>(ts[i]);
                auto taps = triplane_taps(T.h, T.w, static_cast<float>(p.x), static_cast<float>(p.y),
                                          static_cast<float>(p.z));
                sample_feature_taps(T, taps, feat.data() + static_cast<size_t>(i) * nf3);
            }
        }
    });
    std::vector<float> dec_out(static_cast<size_t>(S) * 4);
    DecodeCtx* dctx = req.keep_ctx && ctx ? &ctx->dec_ctx : nullptr;
    if (dctx) {
        decode_batch(dec, feat.data(), S, dec_out.data(), dctx);
    } else {
        parallel_for_chunk(S, 1024, [&](int64_t b, int64_t e) {
            decode_batch(dec, feat.data() + b * nf3, static_cast<int>(e - b),
                         dec_out.data() + b * 4, nullptr);
        });
    }

    // pass E: composite
    if (rgb) *rgb = ImageF(3, cam.height, cam.width, req.white_rgb ? 1.f : 0.f);
    if (alpha) alpha->assign(n_px, 0.f);
    if (feat_img && req.want_feat) *feat_img = ImageF(nf3, cam.height, cam.width, 0.f);
    if (depth && req.want_depth) depth->assign(n_px, static_cast<float>(cam.far_t));
    std::vector<float> sig_all, a_all;
    if (req.keep_ctx && ctx) {
        sig_all.resize(S);
        a_all.resize(S);
    }
    static const float kWhite[3] = {1.f, 1.f, 1.f};
    parallel_for(n_px, [&](int64_t b, int64_t e) {
        for (int64_t r = b; r < e; ++r) {
            if (!hit[r]) continue;
            int n = offs[r + 1] - offs[r];
            const float* dvals = dec_out.data() + static_cast<size_t>(offs[r]) * 4;
            float trans = 1.f;
            float acc_rgb[3] = {0, 0, 0};
            float acc_depth = 0;
            std::vector<float> acc_feat(req.want_feat ? nf3 : 0, 0.f);
            for (int i = 0; i < n; ++i) {
                float dval = dvals[i * 4];
                float sg = 1.f / (1.f + std::exp(-dval));
                float a = 1.f - std::exp(-sg * deltas[offs[r] + i]);
                float w = a * trans;
                acc_rgb[0] += w * dvals[i * 4 + 1];
                acc_rgb[1] += w * dvals[i * 4 + 2];
                acc_rgb[2] += w * dvals[i * 4 + 3];
                if (req.want_feat) {
                    const float* f = feat.data() + (static_cast<size_t>(offs[r]) + i) * nf3;
                    for (int c = 0; c < nf3; ++c) acc_feat[c] += w * f[c];
                }
                if (req.want_depth) acc_depth += w * ts[offs[r] + i];
                if (!sig_all.empty()) {
                    sig_all[offs[r] + i] = sg;
                    a_all[offs[r] + i] = a;
                }
                trans *= 1.f - a;
            }
            float op = 1.f - trans;
            if (rgb) {
                for (int c = 0; c < 3; ++c)
                    rgb->at(c, static_cast<int>(r) / cam.width, static_cast<int>(r) % cam.width) =
                        acc_rgb[c] + (req.white_rgb ? trans * kWhite[c] : 0.f);
            }
            if (alpha) (*alpha)[r] = op;
            if (feat_img && req.want_feat)
                for (int c = 0; c < nf3; ++c)
                    feat_img->at(c, static_cast<int>(r) / cam.width, static_cast<int>(r) % cam.width) =
                        acc_feat[c];
            if (depth && req.want_depth)
                (*depth)[r] = op > 1e-4f ? acc_depth / op : static_cast<float>(cam.far_t);
        }
    });

    if (req.keep_ctx && ctx) {
        ctx->H = cam.height;
        ctx->W = cam.width;
        ctx->n_feat = T.n_feat;
        ctx->grid_h = T.h;
        ctx->grid_w = T.w;
        ctx->origin = rays.origin;
        ctx->dirs = std::move(rays.dirs);
        ctx->ray_offset = std::move(offs);
        ctx->t = std::move(ts);
        ctx->delta = std::move(deltas);
        ctx->feat = std::move(feat);
        ctx->sigma = std::move(sig_all);
        ctx->alpha = std::move(a_all);
    }
}

}  // namespace

RenderResult render(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                    const RenderConfig& cfg, uint64_t seed) {
    RenderResult res;
    ImageF rgb;
    std::vector<float> alpha;
    EngineRequest req;
    render_engine(T, dec, cam, cfg, seed, req, &rgb, &alpha, nullptr, nullptr, nullptr);
    res.rgba = ImageF(4, cam.height, cam.width);
    size_t plane = res.rgba.plane();
    for (int c = 0; c < 3; ++c)
        std::copy(rgb.data.begin() + c * plane, rgb.data.begin() + (c + 1) * plane,
                  res.rgba.data.begin() + c * plane);
    std::copy(alpha.begin(), alpha.end(), res.rgba.data.begin() + 3 * plane);
    return res;
}

RenderResult render_features(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                             const RenderConfig& cfg, uint64_t seed) {
    RenderResult res;
    EngineRequest req;
    req.want_feat = true;
    std::vector<float> alpha;
    render_engine(T, dec, cam, cfg, seed, req, nullptr, &alpha, &res.features, nullptr, nullptr);
    return res;
}

RenderResult render_depth(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                          const RenderConfig& cfg, uint64_t seed) {
    RenderResult res;
    EngineRequest req;
    req.want_depth = true;
    render_engine(T, dec, cam, cfg, seed, req, nullptr, nullptr, nullptr, &res.depth, nullptr);
    return res;
}

ImageF compose_white(const ImageF& rgba) {
    require(rgba.channels == 4, "compose_white: RGBA input required");
    ImageF out(3, rgba.height, rgba.width);
    size_t plane = rgba.plane();
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i)
            out.data[c * plane + i] =
                rgba.data[c * plane + i] + (1.f - rgba.data[3 * plane + i]);
    return out;
}

void render_train(const TriplaneField& T, const FieldDecoder& dec, const Camera& cam,
                  const RenderConfig& cfg, uint64_t seed, ImageF* rgb_white, ImageF* feat_img,
                  RenderCtx* ctx) {
    EngineRequest req;
    req.want_feat = feat_img != nullptr;
    req.white_rgb = true;
    req.keep_ctx = ctx != nullptr;
    render_engine(T, dec, cam, cfg, seed, req, rgb_white, nullptr, feat_img, nullptr, ctx);
}

void render_train_backward(const TriplaneField& T, const FieldDecoder& dec, const RenderCtx& ctx,
                           const ImageF& d_rgb, const ImageF* d_feat, float* dplanes,
                           std::vector<std::vector<float>>& dweights,
                           std::vector<std::vector<float>>& dbiases) {
    int n_px = ctx.H * ctx.W;
    int nf3 = 3 * ctx.n_feat;
    int S = ctx.samples();
    std::vector<float> dec_dout(static_cast<size_t>(S) * 4, 0.f);
    std::vector<float> dfeat(static_cast<size_t>(S) * nf3, 0.f);
    size_t plane = static_cast<size_t>(ctx.H) * ctx.W;

    // per-ray compositing backward; rgb over white and features over zero
    // share the weights, so their density gradients add
    parallel_for(n_px, [&](int64_t b, int64_t e) {
        for (int64_t r = b; r < e; ++r) {
            int n = ctx.ray_offset[r + 1] - ctx.ray_offset[r];
            if (n == 0) continue;
            int o = ctx.ray_offset[r];
            float g_rgb[3];
            for (int c = 0; c < 3; ++c) g_rgb[c] = d_rgb.data[c * plane + r];
            // prefix transmittances
            std::vector<float> T_pre(n);
            float tr = 1.f;
            for (int i = 0; i < n; ++i) {
                T_pre[i] = tr;
                tr *= 1.f - ctx.alpha[o + i];
            }
            // tail starts from the background term (white for rgb, zero for
            // features); no opacity gradient flows in training
            float tail = 0.f;
            for (int c = 0; c < 3; ++c) tail += tr * g_rgb[c];
            for (int i = n - 1; i >= 0; --i) {
                float a = ctx.alpha[o + i];
                float sg = ctx.sigma[o + i];
                float w = a * T_pre[i];
                const float* dvals = ctx.dec_ctx.raw_out.data() + static_cast<size_t>(o + i) * 4;
                // post-activation colors
                float col[3] = {1.f / (1.f + std::exp(-dvals[1])), 1.f / (1.f + std::exp(-dvals[2])),
                                1.f / (1.f + std::exp(-dvals[3]))};
                float gv = g_rgb[0] * col[0] + g_rgb[1] * col[1] + g_rgb[2] * col[2];
                float* dd_out = dec_dout.data() + static_cast<size_t>(o + i) * 4;
                dd_out[1] += w * g_rgb[0];
                dd_out[2] += w * g_rgb[1];
                dd_out[3] += w * g_rgb[2];
                if (d_feat) {
                    const float* f = ctx.feat.data() + static_cast<size_t>(o + i) * nf3;
                    float* df = dfeat.data() + static_cast<size_t>(o + i) * nf3;
                    for (int c = 0; c < nf3; ++c) {
                        float g = d_feat->data[static_cast<size_t>(c) * plane + r];
                        gv += g * f[c];
                        df[c] += w * g;
                    }
                }
                float one_m_a = std::max(1.f - a, 1e-12f);
                float da = T_pre[i] * gv - tail / one_m_a;
                dd_out[0] += da * ctx.delta[o + i] * (1.f - a) * sg * (1.f - sg);
                tail += w * gv;
            }
        }
    });

    // decoder backward over all samples; adds its input grads on top of the
    // compositing ones
    decode_backward(dec, ctx.dec_ctx, dec_dout.data(), dweights, dbiases, dfeat.data());

    // scatter feature grads into the planes
    for (int r = 0; r < n_px; ++r) {
        for (int i = ctx.ray_offset[r]; i < ctx.ray_offset[r + 1]; ++i) {
            Vec3 p = ctx.origin + ctx.dirs[r] * static_cast<double>(ctx.t[i]);
            auto taps = triplane_taps(ctx.grid_h, ctx.grid_w, static_cast<float>(p.x),
                                      static_cast<float>(p.y), static_cast<float>(p.z));
            sample_feature_backward(taps, ctx.n_feat, ctx.grid_h, ctx.grid_w,
                                    dfeat.data() + static_cast<size_t>(i) * nf3, dplanes);
        }
    }
    (void)T;
}

}  // namespace tpg
