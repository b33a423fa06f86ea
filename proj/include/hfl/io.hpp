#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hfl/common.hpp"

// Little-endian binary primitives for the HFS1 / HFCKPT1 file formats.

namespace hfl {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

namespace detail {

template <class T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

} // namespace detail

template <class T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    T le = detail::byteswap_if_big(v);
    os.write(reinterpret_cast<const char*>(&le), sizeof(T));
    require(bool(os), "write failed");
}

template <class T>
T read_le(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(bool(is), "unexpected end of file");
    return detail::byteswap_if_big(v);
}

template <class T>
void write_le_array(std::ostream& os, const T* data, size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(T)));
        require(bool(os), "write failed");
    } else {
        for (size_t i = 0; i < count; ++i) write_le(os, data[i]);
    }
}

template <class T>
void read_le_array(std::istream& is, T* data, size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(data), std::streamsize(count * sizeof(T)));
        require(bool(is), "unexpected end of file");
    } else {
        for (size_t i = 0; i < count; ++i) data[i] = read_le<T>(is);
    }
}

inline void write_magic(std::ostream& os, std::string_view magic) {
    os.write(magic.data(), std::streamsize(magic.size()));
    require(bool(os), "write failed");
}

inline void expect_magic(std::istream& is, std::string_view magic, const std::string& what) {
    std::string buf(magic.size(), '\0');
    is.read(buf.data(), std::streamsize(buf.size()));
    require(bool(is) && buf == magic, what + ": bad magic bytes");
}

inline void write_string(std::ostream& os, std::string_view s) {
    write_le<uint32_t>(os, uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
    require(bool(os), "write failed");
}

inline std::string read_string(std::istream& is, size_t max_len = 1 << 20) {
    auto len = read_le<uint32_t>(is);
    require(len <= max_len, "string field too long");
    std::string s(len, '\0');
    is.read(s.data(), std::streamsize(len));
    require(bool(is), "unexpected end of file");
    return s;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "cannot open file: " + path.string());
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    require(bool(f), "cannot open file for writing: " + path.string());
    f.write(content.data(), std::streamsize(content.size()));
    require(bool(f), "write failed: " + path.string());
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    require(bool(f), "cannot open file for writing: " + path.string());
    return f;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "cannot open file: " + path.string());
    return f;
}

inline std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[size_t(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

} // namespace hfl
