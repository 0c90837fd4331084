#pragma once

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "profgen/errors.hpp"

namespace profgen {

// 64-bit content hash over a byte range: xor-multiply over 8-byte chunks.
// Not cryptographic; detects the accidental corruption the file formats
// guard against.
inline uint64_t content_hash64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    const uint64_t prime = 0x100000001b3ULL;
    size_t i = 0;
    for (; i + 8 <= len; i += 8) {
        uint64_t chunk;
        std::memcpy(&chunk, p + i, 8);
        h = (h ^ chunk) * prime;
    }
    for (; i < len; ++i) h = (h ^ p[i]) * prime;
    return h ^ (h >> 32);
}

static_assert(std::endian::native == std::endian::little,
              "the on-disk formats are little-endian; big-endian hosts are not supported");

// Append-only byte buffer with little-endian primitive writes.
class BinWriter {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const size_t n = buf_.size();
        buf_.resize(n + sizeof(T));
        std::memcpy(buf_.data() + n, &v, sizeof(T));
    }

    void put_bytes(const void* data, size_t len) {
        const size_t n = buf_.size();
        buf_.resize(n + len);
        std::memcpy(buf_.data() + n, data, len);
    }

    void put_string(const std::string& s) {
        put<uint32_t>(static_cast<uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }

    template <typename T>
    void put_array(const std::vector<T>& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        put_bytes(v.data(), v.size() * sizeof(T));
    }

    const std::vector<uint8_t>& bytes() const { return buf_; }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

// Bounds-checked reader over a byte range.
class BinReader {
public:
    BinReader(const uint8_t* data, size_t len, std::string origin)
        : data_(data), len_(len), origin_(std::move(origin)) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string() {
        const auto n = get<uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

    template <typename T>
    std::vector<T> get_array(size_t count) {
        static_assert(std::is_trivially_copyable_v<T>);
        need(count * sizeof(T));
        std::vector<T> v(count);
        std::memcpy(v.data(), data_ + pos_, count * sizeof(T));
        pos_ += count * sizeof(T);
        return v;
    }

    size_t remaining() const { return len_ - pos_; }

private:
    void need(size_t n) const {
        if (len_ - pos_ < n) throw InputError(origin_ + ": truncated file");
    }

    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
    std::string origin_;
};

inline void write_file(const std::filesystem::path& path, const void* data, size_t len) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot open '" + path.string() + "' for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw InputError("write failed for '" + path.string() + "'");
}

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw InputError("missing file '" + path.string() + "'");
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<uint8_t> buf(size);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!f) throw InputError("read failed for '" + path.string() + "'");
    return buf;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, text.data(), text.size());
}

// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "profgen_") {
        static std::atomic<uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (prefix + std::to_string(static_cast<uint64_t>(::getpid())) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace profgen
