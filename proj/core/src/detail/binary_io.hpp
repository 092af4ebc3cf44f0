#pragma once

#include "ninepatch/error.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace ninepatch::detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

inline void put_i32(std::ostream& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

inline void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

inline void read_exact(std::istream& in, char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("unexpected end of file");
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::int32_t get_i32(std::istream& in) { return static_cast<std::int32_t>(get_u32(in)); }

inline double get_f64(std::istream& in) {
    unsigned char b[8];
    read_exact(in, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::size_t max_len = 1u << 26) {
    const std::uint32_t n = get_u32(in);
    if (n > max_len) throw DataError("string field too long");
    std::string s(n, '\0');
    read_exact(in, s.data(), n);
    return s;
}

}  // namespace ninepatch::detail
