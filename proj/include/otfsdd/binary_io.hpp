// SPDX-License-Identifier: Apache-2.0
#pragma once

// Little-endian primitives shared by the weight, dataset and parity-vector formats.

#include "otfsdd/common.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

namespace otfsdd::bin {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class TruncatedInput : public Error {
public:
    explicit TruncatedInput(const std::string& what) : Error(ErrorKind::io, what) {}
};

inline void write_bytes(std::ostream& os, const void* data, std::size_t n) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os) throw io_error("write failed");
}

inline void read_bytes(std::istream& is, void* data, std::size_t n, const char* what) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw TruncatedInput(std::string("unexpected end of input reading ") + what);
}

template <typename T>
void write(std::ostream& os, T value) {
    write_bytes(os, &value, sizeof(T));
}

template <typename T>
T read(std::istream& is, const char* what) {
    T value{};
    read_bytes(is, &value, sizeof(T), what);
    return value;
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { write_bytes(os, magic, 4); }

inline std::array<char, 4> read_magic(std::istream& is) {
    std::array<char, 4> m{};
    read_bytes(is, m.data(), 4, "magic");
    return m;
}

inline bool magic_equals(const std::array<char, 4>& m, const char (&magic)[5]) { return std::memcmp(m.data(), magic, 4) == 0; }

inline void write_floats(std::ostream& os, std::span<const float> v) { write_bytes(os, v.data(), v.size_bytes()); }

inline void read_floats(std::istream& is, std::span<float> v, const char* what) { read_bytes(is, v.data(), v.size_bytes(), what); }

}  // namespace otfsdd::bin
