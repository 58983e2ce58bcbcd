#include "tpg/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tpg/serial.hpp"

namespace tpg {

ImageU8 to_u8(const ImageF& img) {
    ImageU8 out;
    out.channels = img.channels;
    out.height = img.height;
    out.width = img.width;
    out.data.resize(static_cast<size_t>(img.channels) * img.height * img.width);
    size_t plane = img.plane();
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float v = img.data[c * plane + y * static_cast<size_t>(img.width) + x];
                v = std::min(1.f, std::max(0.f, v));
                out.data[(static_cast<size_t>(y) * img.width + x) * img.channels + c] =
                    static_cast<uint8_t>(std::lround(v * 255.f));
            }
    return out;
}

ImageF to_float(const ImageU8& img) {
    ImageF out(img.channels, img.height, img.width);
    size_t plane = out.plane();
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.data[c * plane + y * static_cast<size_t>(img.width) + x] =
                    img.data[(static_cast<size_t>(y) * img.width + x) * img.channels + c] / 255.f;
    return out;
}

namespace {

void put_chunk(std::vector<uint8_t>& out, const char type[4], const uint8_t* data, size_t n) {
    auto be32 = [&](uint32_t v) {
        out.push_back(static_cast<uint8_t>(v >> 24));
        out.push_back(static_cast<uint8_t>(v >> 16));
        out.push_back(static_cast<uint8_t>(v >> 8));
        out.push_back(static_cast<uint8_t>(v));
    };
    be32(static_cast<uint32_t>(n));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (n) out.insert(out.end(), data, data + n);
    uint32_t crc = crc32(0, out.data() + start, static_cast<uInt>(4 + n));
    be32(crc);
}

uint32_t read_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
    require(img.channels == 3 || img.channels == 4, "write_png: RGB or RGBA only");
    require(img.height > 0 && img.width > 0, "write_png: empty image");

    std::vector<uint8_t> raw;
    size_t stride = static_cast<size_t>(img.width) * img.channels;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter type 0 per row
        raw.insert(raw.end(), img.data.begin() + y * stride, img.data.begin() + (y + 1) * stride);
    }

    uLongf zcap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> zbuf(zcap);
    // fixed level so output bytes are reproducible
    require(compress2(zbuf.data(), &zcap, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK,
            "png deflate failed");
    zbuf.resize(zcap);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    uint8_t ihdr[13];
    uint32_t w = static_cast<uint32_t>(img.width), h = static_cast<uint32_t>(img.height);
    ihdr[0] = w >> 24; ihdr[1] = w >> 16; ihdr[2] = w >> 8; ihdr[3] = w;
    ihdr[4] = h >> 24; ihdr[5] = h >> 16; ihdr[6] = h >> 8; ihdr[7] = h;
    ihdr[8] = 8;                                    // bit depth
    ihdr[9] = img.channels == 3 ? 2 : 6;            // color type
    ihdr[10] = ihdr[11] = ihdr[12] = 0;             // deflate/adaptive/no interlace
    put_chunk(out, "IHDR", ihdr, 13);
    put_chunk(out, "IDAT", zbuf.data(), zbuf.size());
    put_chunk(out, "IEND", nullptr, 0);
    write_file_atomic(path, out.data(), out.size());
}

ImageU8 read_png(const std::string& path) {
    auto buf = read_file(path);
    require(buf.size() > 8 && std::memcmp(buf.data(), "\x89PNG\r\n\x1a\n", 8) == 0,
            "not a PNG file: " + path);
    size_t pos = 8;
    uint32_t w = 0, h = 0;
    int channels = 0, bit_depth = 0;
    std::vector<uint8_t> idat;
    while (pos + 8 <= buf.size()) {
        uint32_t len = read_be32(&buf[pos]);
        require(pos + 12 + len <= buf.size(), "truncated PNG: " + path);
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        const uint8_t* data = &buf[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = read_be32(data);
            h = read_be32(data + 4);
            bit_depth = data[8];
            int color = data[9];
            require(bit_depth == 8 && (color == 2 || color == 6), "unsupported PNG format");
            require(data[12] == 0, "interlaced PNG unsupported");
            channels = color == 2 ? 3 : 4;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    require(w > 0 && h > 0 && !idat.empty(), "malformed PNG: " + path);

    size_t stride = static_cast<size_t>(w) * channels;
    std::vector<uint8_t> raw((stride + 1) * h);
    uLongf rawlen = static_cast<uLongf>(raw.size());
    require(uncompress(raw.data(), &rawlen, idat.data(), static_cast<uLong>(idat.size())) == Z_OK &&
                rawlen == raw.size(),
            "png inflate failed: " + path);

    ImageU8 img;
    img.channels = channels;
    img.height = static_cast<int>(h);
    img.width = static_cast<int>(w);
    img.data.resize(stride * h);
    int bpp = channels;
    for (uint32_t y = 0; y < h; ++y) {
        uint8_t filter = raw[y * (stride + 1)];
        const uint8_t* src = &raw[y * (stride + 1) + 1];
        uint8_t* dst = &img.data[y * stride];
        const uint8_t* prev = y ? &img.data[(y - 1) * stride] : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<size_t>(bpp) ? dst[i - bpp] : 0;
            int b = prev ? prev[i] : 0;
            int c = (prev && i >= static_cast<size_t>(bpp)) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: fail("bad PNG filter");
            }
            dst[i] = static_cast<uint8_t>(v);
        }
    }
    return img;
}

void write_depth(const std::string& path, const std::vector<float>& depth, int h, int w) {
    require(static_cast<size_t>(h) * w == depth.size(), "write_depth: size mismatch");
    ByteWriter bw;
    bw.bytes("DPTH", 4);
    bw.u32(1);
    bw.u32(static_cast<uint32_t>(h));
    bw.u32(static_cast<uint32_t>(w));
    bw.f32_array(depth.data(), depth.size());
    write_file_atomic(path, bw.buf.data(), bw.buf.size());
}

std::vector<float> read_depth(const std::string& path, int* h, int* w) {
    auto buf = read_file(path);
    ByteReader br(buf);
    char magic[4];
    br.bytes(magic, 4);
    require(std::memcmp(magic, "DPTH", 4) == 0, "not a depth file: " + path);
    require(br.u32() == 1, "unsupported depth file version");
    *h = static_cast<int>(br.u32());
    *w = static_cast<int>(br.u32());
    std::vector<float> depth(static_cast<size_t>(*h) * *w);
    br.f32_array(depth.data(), depth.size());
    return depth;
}

ImageF downscale(const ImageF& img, int factor) {
    require(factor >= 1 && img.height % factor == 0 && img.width % factor == 0,
            "downscale: size not divisible by factor");
    ImageF out(img.channels, img.height / factor, img.width / factor);
    float inv = 1.f / (factor * factor);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                float s = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += img.at(c, y * factor + dy, x * factor + dx);
                out.at(c, y, x) = s * inv;
            }
    return out;
}

ImageF resize_bilinear(const ImageF& img, int h, int w) {
    ImageF out(img.channels, h, w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y) {
            float fy = (y + 0.5f) * img.height / h - 0.5f;
            int y0 = static_cast<int>(std::floor(fy));
            float wy = fy - y0;
            int y0c = std::clamp(y0, 0, img.height - 1);
            int y1c = std::clamp(y0 + 1, 0, img.height - 1);
            for (int x = 0; x < w; ++x) {
                float fx = (x + 0.5f) * img.width / w - 0.5f;
                int x0 = static_cast<int>(std::floor(fx));
                float wx = fx - x0;
                int x0c = std::clamp(x0, 0, img.width - 1);
                int x1c = std::clamp(x0 + 1, 0, img.width - 1);
                out.at(c, y, x) = (1 - wy) * ((1 - wx) * img.at(c, y0c, x0c) + wx * img.at(c, y0c, x1c)) +
                                  wy * ((1 - wx) * img.at(c, y1c, x0c) + wx * img.at(c, y1c, x1c));
            }
        }
    return out;
}

}  // namespace tpg
