#include "tpg/serial.hpp"

#include <cstdio>
#include <filesystem>

namespace tpg {

namespace fs = std::filesystem;

std::vector<uint8_t> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    require(f != nullptr, "cannot open file: " + path);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> buf(static_cast<size_t>(size));
    size_t got = size > 0 ? std::fread(buf.data(), 1, buf.size(), f) : 0;
    std::fclose(f);
    require(got == buf.size(), "short read: " + path);
    return buf;
}

std::string read_text_file(const std::string& path) {
    auto b = read_file(path);
    return std::string(b.begin(), b.end());
}

void write_file_atomic(const std::string& path, const void* data, size_t n) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    std::string tmp = path + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    require(f != nullptr, "cannot create file: " + tmp);
    size_t put = n > 0 ? std::fwrite(data, 1, n, f) : 0;
    int flushed = std::fflush(f);
    std::fclose(f);
    require(put == n && flushed == 0, "short write: " + tmp);
    fs::rename(tmp, path);
}

void write_text_file_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void make_dirs(const std::string& path) { fs::create_directories(path); }

}  // namespace tpg
