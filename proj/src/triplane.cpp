#include "tpg/triplane.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "tpg/serial.hpp"

namespace tpg {

void TriplaneField::validate() const {
    require(n_feat >= 1, "triplane: n_feat must be >= 1");
    require(h == w && h >= 1, "triplane: planes must be square");
    require(planes.size() == static_cast<size_t>(3) * n_feat * h * w, "triplane: bad buffer size");
    for (float v : planes) require(std::isfinite(v), "triplane: non-finite entry");
}

namespace {

BilinearTap plane_tap(int h, int w, float a, float b) {
    // world [-1,1] -> pixel coords with texel centers at half-integers
    float fx = (a + 1.f) * 0.5f * w - 0.5f;
    float fy = (b + 1.f) * 0.5f * h - 0.5f;
    int x0 = static_cast<int>(std::floor(fx));
    int y0 = static_cast<int>(std::floor(fy));
    float wx = fx - x0;
    float wy = fy - y0;
    int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
    int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
    BilinearTap t;
    t.i00 = static_cast<size_t>(y0c) * w + x0c;
    t.i01 = static_cast<size_t>(y0c) * w + x1c;
    t.i10 = static_cast<size_t>(y1c) * w + x0c;
    t.i11 = static_cast<size_t>(y1c) * w + x1c;
    t.w00 = (1 - wy) * (1 - wx);
    t.w01 = (1 - wy) * wx;
    t.w10 = wy * (1 - wx);
    t.w11 = wy * wx;
    t.dfx = 0.5f * w;
    t.dfy = 0.5f * h;
    t.gx00 = -(1 - wy); t.gx01 = (1 - wy); t.gx10 = -wy; t.gx11 = wy;
    t.gy00 = -(1 - wx); t.gy01 = -wx;     t.gy10 = (1 - wx); t.gy11 = wx;
    return t;
}

}  // namespace

std::array<BilinearTap, 3> triplane_taps(int h, int w, float x, float y, float z) {
    return {plane_tap(h, w, x, y), plane_tap(h, w, x, z), plane_tap(h, w, y, z)};
}

std::vector<float> sample_feature(const TriplaneField& T, float x, float y, float z) {
    require(std::fabs(x) <= 1.f && std::fabs(y) <= 1.f && std::fabs(z) <= 1.f,
            "sample_feature: point outside [-1,1]^3");
    std::vector<float> out(static_cast<size_t>(3) * T.n_feat);
    auto taps = triplane_taps(T.h, T.w, x, y, z);
    sample_feature_taps(T, taps, out.data());
    return out;
}

void sample_feature_taps(const TriplaneField& T, const std::array<BilinearTap, 3>& taps,
                         float* out) {
    size_t ps = T.plane_size();
    for (int k = 0; k < 3; ++k) {
        const BilinearTap& t = taps[k];
        const float* base = T.planes.data() + static_cast<size_t>(k) * T.n_feat * ps;
        for (int c = 0; c < T.n_feat; ++c) {
            const float* p = base + static_cast<size_t>(c) * ps;
            out[k * T.n_feat + c] =
                t.w00 * p[t.i00] + t.w01 * p[t.i01] + t.w10 * p[t.i10] + t.w11 * p[t.i11];
        }
    }
}

void sample_feature_backward(const std::array<BilinearTap, 3>& taps, int n_feat, int h, int w,
                             const float* dfeat, float* dplanes) {
    size_t ps = static_cast<size_t>(h) * w;
    for (int k = 0; k < 3; ++k) {
        const BilinearTap& t = taps[k];
        float* base = dplanes + static_cast<size_t>(k) * n_feat * ps;
        for (int c = 0; c < n_feat; ++c) {
            float* p = base + static_cast<size_t>(c) * ps;
            float g = dfeat[k * n_feat + c];
            p[t.i00] += g * t.w00;
            p[t.i01] += g * t.w01;
            p[t.i10] += g * t.w10;
            p[t.i11] += g * t.w11;
        }
    }
}

void sample_feature_pos_grad(const TriplaneField& T, const std::array<BilinearTap, 3>& taps,
                             const float* dfeat, float dpos[3]) {
    size_t ps = T.plane_size();
    // plane k axes: (col, row) = (a, b); a/b map to world coords per plane
    // xy: a=x b=y; xz: a=x b=z; yz: a=y b=z
    static const int axis_a[3] = {0, 0, 1};
    static const int axis_b[3] = {1, 2, 2};
    for (int k = 0; k < 3; ++k) {
        const BilinearTap& t = taps[k];
        const float* base = T.planes.data() + static_cast<size_t>(k) * T.n_feat * ps;
        float ga = 0, gb = 0;
        for (int c = 0; c < T.n_feat; ++c) {
            const float* p = base + static_cast<size_t>(c) * ps;
            float g = dfeat[k * T.n_feat + c];
            ga += g * (t.gx00 * p[t.i00] + t.gx01 * p[t.i01] + t.gx10 * p[t.i10] + t.gx11 * p[t.i11]);
            gb += g * (t.gy00 * p[t.i00] + t.gy01 * p[t.i01] + t.gy10 * p[t.i10] + t.gy11 * p[t.i11]);
        }
        dpos[axis_a[k]] += ga * t.dfx;
        dpos[axis_b[k]] += gb * t.dfy;
    }
}

FieldDecoder FieldDecoder::init(int in_dim, int hidden, int depth, Rng& rng) {
    require(in_dim >= 1 && hidden >= 1 && depth >= 1, "decoder: bad dims");
    FieldDecoder dec;
    dec.in_dim = in_dim;
    dec.hidden = hidden;
    dec.depth = depth;
    for (int l = 0; l <= depth; ++l) {
        int in = dec.layer_in(l), out = dec.layer_out(l);
        std::vector<float> W(static_cast<size_t>(out) * in), b(out, 0.f);
        float scale = std::sqrt(2.f / in);
        for (auto& v : W) v = rng.normalf() * scale;
        dec.weights.push_back(std::move(W));
        dec.biases.push_back(std::move(b));
    }
    return dec;
}

size_t FieldDecoder::param_count() const {
    size_t n = 0;
    for (size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

void FieldDecoder::validate() const {
    require(static_cast<int>(weights.size()) == depth + 1 && biases.size() == weights.size(),
            "decoder: layer count mismatch");
    for (int l = 0; l <= depth; ++l) {
        require(weights[l].size() == static_cast<size_t>(layer_out(l)) * layer_in(l),
                "decoder: weight shape mismatch");
        require(biases[l].size() == static_cast<size_t>(layer_out(l)), "decoder: bias shape mismatch");
    }
}

namespace {
constexpr float kLeak = 0.2f;
inline float lrelu(float v) { return v > 0 ? v : kLeak * v; }
inline float lrelu_grad(float v) { return v > 0 ? 1.f : kLeak; }
inline float sigmoidf(float v) { return 1.f / (1.f + std::exp(-v)); }
}  // namespace

DecodeOut decode(const FieldDecoder& dec, const std::vector<float>& feature) {
    require(static_cast<int>(feature.size()) == dec.in_dim, "decode: feature length mismatch");
    float out[4];
    decode_batch(dec, feature.data(), 1, out, nullptr);
    DecodeOut r;
    r.d = out[0];
    r.rgb[0] = out[1];
    r.rgb[1] = out[2];
    r.rgb[2] = out[3];
    return r;
}

void decode_batch(const FieldDecoder& dec, const float* features, int count, float* out,
                  DecodeCtx* ctx) {
    int L = dec.depth + 1;
    std::vector<float> cur(features, features + static_cast<size_t>(count) * dec.in_dim);
    if (ctx) {
        ctx->count = count;
        ctx->acts.assign(1, cur);
        ctx->acts.reserve(L + 1);
    }
    for (int l = 0; l < L; ++l) {
        int in = dec.layer_in(l), on = dec.layer_out(l);
        const float* W = dec.weights[l].data();
        const float* b = dec.biases[l].data();
        std::vector<float> next(static_cast<size_t>(count) * on);
        for (int s = 0; s < count; ++s) {
            const float* xi = cur.data() + static_cast<size_t>(s) * in;
            float* yo = next.data() + static_cast<size_t>(s) * on;
            for (int o = 0; o < on; ++o) {
                const float* wr = W + static_cast<size_t>(o) * in;
                float acc = b[o];
                for (int i = 0; i < in; ++i) acc += wr[i] * xi[i];
                yo[o] = acc;
            }
        }
        if (l < dec.depth) {
            for (auto& v : next) v = lrelu(v);
            if (ctx) ctx->acts.push_back(next);
        } else {
            if (ctx) ctx->raw_out = next;
            for (int s = 0; s < count; ++s) {
                float* yo = next.data() + static_cast<size_t>(s) * 4;
                yo[1] = sigmoidf(yo[1]);
                yo[2] = sigmoidf(yo[2]);
                yo[3] = sigmoidf(yo[3]);
            }
        }
        cur.swap(next);
    }
    std::memcpy(out, cur.data(), static_cast<size_t>(count) * 4 * sizeof(float));
}

void decode_backward(const FieldDecoder& dec, const DecodeCtx& ctx, const float* dout,
                     std::vector<std::vector<float>>& dweights,
                     std::vector<std::vector<float>>& dbiases, float* dfeatures) {
    int count = ctx.count;
    int L = dec.depth + 1;
    // gradient w.r.t. pre-activation of the output layer
    std::vector<float> delta(static_cast<size_t>(count) * 4);
    for (int s = 0; s < count; ++s) {
        const float* go = dout + static_cast<size_t>(s) * 4;
        const float* raw = ctx.raw_out.data() + static_cast<size_t>(s) * 4;
        float* dl = delta.data() + static_cast<size_t>(s) * 4;
        dl[0] = go[0];
        for (int c = 1; c < 4; ++c) {
            float sg = sigmoidf(raw[c]);
            dl[c] = go[c] * sg * (1.f - sg);
        }
    }
    for (int l = L - 1; l >= 0; --l) {
        int in = dec.layer_in(l), on = dec.layer_out(l);
        const float* act_in = ctx.acts[l].data();
        const float* W = dec.weights[l].data();
        float* dW = dweights[l].data();
        float* db = dbiases[l].data();
        // parameter grads, sample-ascending accumulation
        for (int s = 0; s < count; ++s) {
            const float* dl = delta.data() + static_cast<size_t>(s) * on;
            const float* xi = act_in + static_cast<size_t>(s) * in;
            for (int o = 0; o < on; ++o) {
                float g = dl[o];
                db[o] += g;
                float* dwr = dW + static_cast<size_t>(o) * in;
                for (int i = 0; i < in; ++i) dwr[i] += g * xi[i];
            }
        }
        if (l == 0) {
            if (dfeatures) {
                for (int s = 0; s < count; ++s) {
                    const float* dl = delta.data() + static_cast<size_t>(s) * on;
                    float* df = dfeatures + static_cast<size_t>(s) * in;
                    for (int i = 0; i < in; ++i) {
                        float acc = 0;
                        for (int o = 0; o < on; ++o) acc += W[static_cast<size_t>(o) * in + i] * dl[o];
                        df[i] += acc;
                    }
                }
            }
            break;
        }
        // delta for previous layer (through this layer's weights and the
        // previous layer's leaky-ReLU)
        std::vector<float> dprev(static_cast<size_t>(count) * in);
        for (int s = 0; s < count; ++s) {
            const float* dl = delta.data() + static_cast<size_t>(s) * on;
            const float* a = ctx.acts[l].data() + static_cast<size_t>(s) * in;
            float* dp = dprev.data() + static_cast<size_t>(s) * in;
            for (int i = 0; i < in; ++i) {
                float acc = 0;
                for (int o = 0; o < on; ++o) acc += W[static_cast<size_t>(o) * in + i] * dl[o];
                // post-activation value is positive iff pre-activation was
                dp[i] = acc * (a[i] > 0 ? 1.f : kLeak);
            }
        }
        delta.swap(dprev);
    }
}

TriplaneStats compute_stats(const std::vector<TriplaneField>& dataset) {
    require(!dataset.empty(), "compute_stats: empty dataset");
    StatsAccumulator acc;
    for (const auto& T : dataset) acc.add(T);
    return acc.finish();
}

void StatsAccumulator::add(const TriplaneField& T) {
    int C = T.channels();
    if (sum.empty()) {
        sum.assign(C, 0.0);
        sumsq.assign(C, 0.0);
    }
    require(static_cast<int>(sum.size()) == C, "compute_stats: channel count mismatch");
    size_t ps = T.plane_size();
    for (int c = 0; c < C; ++c) {
        const float* p = T.planes.data() + static_cast<size_t>(c) * ps;
        double s = 0, s2 = 0;
        for (size_t i = 0; i < ps; ++i) {
            double v = p[i];
            s += v;
            s2 += v * v;
        }
        sum[c] += s;
        sumsq[c] += s2;
    }
    count_per_channel += ps;
}

TriplaneStats StatsAccumulator::finish() const {
    require(count_per_channel > 0, "compute_stats: empty dataset");
    TriplaneStats st;
    int C = static_cast<int>(sum.size());
    st.mean.resize(C);
    st.stdev.resize(C);
    double n = static_cast<double>(count_per_channel);
    for (int c = 0; c < C; ++c) {
        double mu = sum[c] / n;
        double var = sumsq[c] / n - mu * mu;
        st.mean[c] = mu;
        st.stdev[c] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
    }
    return st;
}

TriplaneField normalize_triplane(const TriplaneField& T, const TriplaneStats& stats) {
    require(T.channels() == stats.channels(), "normalize: channel count mismatch with stats");
    TriplaneField out(T.n_feat, T.h, T.w);
    size_t ps = T.plane_size();
    for (int c = 0; c < T.channels(); ++c) {
        double mu = stats.mean[c], sd = stats.stdev[c];
        const float* src = T.planes.data() + static_cast<size_t>(c) * ps;
        float* dst = out.planes.data() + static_cast<size_t>(c) * ps;
        for (size_t i = 0; i < ps; ++i) {
            double v = (static_cast<double>(src[i]) - mu) / sd * stats.scale;
            v = std::clamp(v, -stats.clamp, stats.clamp);
            dst[i] = static_cast<float>(v);
        }
    }
    return out;
}

TriplaneField denormalize_triplane(const TriplaneField& Tn, const TriplaneStats& stats) {
    require(Tn.channels() == stats.channels(), "denormalize: channel count mismatch with stats");
    TriplaneField out(Tn.n_feat, Tn.h, Tn.w);
    size_t ps = Tn.plane_size();
    for (int c = 0; c < Tn.channels(); ++c) {
        double mu = stats.mean[c], sd = stats.stdev[c];
        const float* src = Tn.planes.data() + static_cast<size_t>(c) * ps;
        float* dst = out.planes.data() + static_cast<size_t>(c) * ps;
        for (size_t i = 0; i < ps; ++i)
            dst[i] = static_cast<float>(static_cast<double>(src[i]) / stats.scale * sd + mu);
    }
    return out;
}

void save_triplane(const std::string& path, const TriplaneField& T) {
    ByteWriter bw;
    bw.bytes("TRIP", 4);
    bw.u32(1);
    bw.u32(static_cast<uint32_t>(T.n_feat));
    bw.u32(static_cast<uint32_t>(T.h));
    bw.u32(static_cast<uint32_t>(T.w));
    bw.f32_array(T.planes.data(), T.planes.size());
    write_file_atomic(path, bw.buf.data(), bw.buf.size());
}

TriplaneField load_triplane(const std::string& path) {
    auto buf = read_file(path);
    ByteReader br(buf);
    char magic[4];
    br.bytes(magic, 4);
    require(std::memcmp(magic, "TRIP", 4) == 0, "not a triplane file: " + path);
    require(br.u32() == 1, "unsupported triplane version: " + path);
    TriplaneField T;
    T.n_feat = static_cast<int>(br.u32());
    T.h = static_cast<int>(br.u32());
    T.w = static_cast<int>(br.u32());
    require(T.n_feat >= 1 && T.h >= 1 && T.w >= 1 && T.n_feat <= 1024 && T.h <= 65536,
            "triplane header out of range: " + path);
    T.planes.resize(static_cast<size_t>(3) * T.n_feat * T.h * T.w);
    br.f32_array(T.planes.data(), T.planes.size());
    return T;
}

void save_stats(const std::string& path, const TriplaneStats& stats) {
    nlohmann::json j;
    j["mean"] = stats.mean;
    j["std"] = stats.stdev;
    j["scale"] = stats.scale;
    j["clamp"] = stats.clamp;
    write_text_file_atomic(path, j.dump(2) + "\n");
}

TriplaneStats load_stats(const std::string& path) {
    auto j = nlohmann::json::parse(read_text_file(path));
    TriplaneStats st;
    st.mean = j.at("mean").get<std::vector<double>>();
    st.stdev = j.at("std").get<std::vector<double>>();
    st.scale = j.at("scale").get<double>();
    st.clamp = j.at("clamp").get<double>();
    require(st.mean.size() == st.stdev.size(), "stats file: mean/std length mismatch");
    for (double s : st.stdev) require(s > 0, "stats file: non-positive std");
    return st;
}

}  // namespace tpg
