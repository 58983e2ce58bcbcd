#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "tpg/common.hpp"

namespace tpg {

std::vector<uint8_t> read_file(const std::string& path);
std::string read_text_file(const std::string& path);
// Writes via temp file + rename so readers never observe partial files.
void write_file_atomic(const std::string& path, const void* data, size_t n);
void write_text_file_atomic(const std::string& path, const std::string& text);
bool file_exists(const std::string& path);
void make_dirs(const std::string& path);

struct ByteWriter {
    std::vector<uint8_t> buf;

    void bytes(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u32(uint32_t v) { bytes(&v, 4); }  // little-endian hosts only
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void f32_array(const float* p, size_t n) { bytes(p, n * 4); }
};

struct ByteReader {
    const uint8_t* p;
    size_t n, pos = 0;

    ByteReader(const uint8_t* data, size_t size) : p(data), n(size) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : p(v.data()), n(v.size()) {}

    void bytes(void* out, size_t k) {
        require(pos + k <= n, "truncated binary file");
        std::memcpy(out, p + pos, k);
        pos += k;
    }
    uint32_t u32() {
        uint32_t v;
        bytes(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        bytes(&v, 8);
        return v;
    }
    float f32() {
        float v;
        bytes(&v, 4);
        return v;
    }
    std::string str() {
        uint32_t k = u32();
        require(pos + k <= n, "truncated string");
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
    void f32_array(float* out, size_t k) { bytes(out, k * 4); }
};

}  // namespace tpg
