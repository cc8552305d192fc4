#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pmlearn/common.hpp"

namespace pml {

// All on-disk integers and floats are little-endian.
namespace bin {

inline void put_u8(std::ostream& os, std::uint8_t v) {
    os.put(static_cast<char>(v));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(os, u);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(os, u);
}

inline std::uint8_t get_u8(std::istream& is) {
    int c = is.get();
    if (c < 0) throw format_error("unexpected end of file");
    return static_cast<std::uint8_t>(c);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw format_error("unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t lo = get_u32(is);
    std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

inline float get_f32(std::istream& is) {
    std::uint32_t u = get_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline double get_f64(std::istream& is) {
    std::uint64_t u = get_u64(is);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline void put_magic(std::ostream& os, const char* magic) {
    os.write(magic, static_cast<std::streamsize>(std::strlen(magic)));
}

inline void expect_magic(std::istream& is, const char* magic) {
    std::size_t n = std::strlen(magic);
    std::vector<char> buf(n);
    is.read(buf.data(), static_cast<std::streamsize>(n));
    if (!is || std::memcmp(buf.data(), magic, n) != 0) {
        throw format_error(std::string("bad magic, expected ") + magic);
    }
}

inline void put_f32_block(std::ostream& os, const std::vector<float>& v) {
    for (float f : v) put_f32(os, f);
}

inline void get_f32_block(std::istream& is, std::vector<float>& v) {
    for (float& f : v) f = get_f32(is);
}

}  // namespace bin

// 8-bit binary PPM, values in [0,1] per plane-major RGB buffer.
inline void write_ppm(const std::string& path, int width, int height,
                      const std::vector<float>& rgb_planes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open for writing: " + path);
    os << "P6\n" << width << " " << height << "\n255\n";
    std::size_t plane = static_cast<std::size_t>(width) * height;
    for (std::size_t i = 0; i < plane; ++i) {
        for (int p = 0; p < 3; ++p) {
            float v = rgb_planes[p * plane + i];
            int b = static_cast<int>(v * 255.0f + 0.5f);
            os.put(static_cast<char>(b < 0 ? 0 : (b > 255 ? 255 : b)));
        }
    }
}

// 16-bit binary PGM, depth in millimeters.
inline void write_pgm16(const std::string& path, int width, int height,
                        const std::vector<float>& depth_m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open for writing: " + path);
    os << "P5\n" << width << " " << height << "\n65535\n";
    for (float d : depth_m) {
        int mm = static_cast<int>(d * 1000.0f + 0.5f);
        if (mm < 0) mm = 0;
        if (mm > 65535) mm = 65535;
        os.put(static_cast<char>(mm >> 8));
        os.put(static_cast<char>(mm & 0xff));
    }
}

namespace detail {
inline int pnm_int(std::istream& is) {
    int c = is.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') {
            while (c != '\n' && c != EOF) c = is.get();
        }
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
        any = true;
    }
    if (!any) throw format_error("malformed PNM header");
    return v;
}
}  // namespace detail

inline void read_ppm(const std::string& path, int& width, int& height,
                     std::vector<float>& rgb_planes) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open: " + path);
    char p, six;
    is.get(p);
    is.get(six);
    if (p != 'P' || six != '6') throw format_error("not a P6 PPM: " + path);
    width = detail::pnm_int(is);
    height = detail::pnm_int(is);
    int maxval = detail::pnm_int(is);
    if (maxval != 255) throw format_error("PPM maxval must be 255: " + path);
    std::size_t plane = static_cast<std::size_t>(width) * height;
    rgb_planes.assign(plane * 3, 0.f);
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            rgb_planes[c * plane + i] = static_cast<float>(bin::get_u8(is)) / 255.0f;
        }
    }
}

inline void read_pgm16(const std::string& path, int& width, int& height,
                       std::vector<float>& depth_m) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open: " + path);
    char p, five;
    is.get(p);
    is.get(five);
    if (p != 'P' || five != '5') throw format_error("not a P5 PGM: " + path);
    width = detail::pnm_int(is);
    height = detail::pnm_int(is);
    int maxval = detail::pnm_int(is);
    if (maxval != 65535) throw format_error("PGM maxval must be 65535: " + path);
    depth_m.assign(static_cast<std::size_t>(width) * height, 0.f);
    for (auto& d : depth_m) {
        int hi = bin::get_u8(is);
        int lo = bin::get_u8(is);
        d = static_cast<float>((hi << 8) | lo) / 1000.0f;
    }
}

}  // namespace pml
