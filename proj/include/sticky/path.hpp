#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sticky/error.hpp"

namespace sticky {

/// A discretised N-point trajectory: states[k * N + i] is coordinate i at times[k].
struct Path {
    int N = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> times;
    std::vector<double> states;
    /// Optional per-row flag, used by sticky paths for the exact-zero set.
    std::vector<unsigned char> at_zero;
    std::map<std::string, std::string> meta;

    std::size_t rows() const noexcept { return times.size(); }
    double at(std::size_t row, int i) const { return states[row * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)]; }
    const double* row(std::size_t k) const { return states.data() + k * static_cast<std::size_t>(N); }

    void check() const {
        if (N < 1) throw Error("path: N must be >= 1");
        if (states.size() != times.size() * static_cast<std::size_t>(N)) throw Error("path: states/times length mismatch");
        if (!at_zero.empty() && at_zero.size() != times.size()) throw Error("path: at_zero length mismatch");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (!(times[k] > times[k - 1])) throw Error("path: times must increase");
        for (double v : states)
            if (!std::isfinite(v)) throw Error("path: non-finite state");
    }
};

inline void write_csv(const Path& p, std::ostream& os) {
    os << "t";
    for (int i = 0; i < p.N; ++i) os << ",x" << i + 1;
    if (!p.at_zero.empty()) os << ",at_zero";
    os << "\n";
    os.precision(17);
    for (std::size_t k = 0; k < p.rows(); ++k) {
        os << p.times[k];
        for (int i = 0; i < p.N; ++i) os << "," << p.at(k, i);
        if (!p.at_zero.empty()) os << "," << static_cast<int>(p.at_zero[k]);
        os << "\n";
    }
}

/// Binary layout: a 64-byte little-endian header
///   0  char[8]  magic "STKYPATH"
///   8  uint32   version (1)
///  12  uint32   N
///  16  uint64   rows
///  24  double   dt
///  32  uint64   seed
///  40  uint32   flags (bit 0: at_zero column present)
///  44  byte[20] reserved, zero
/// followed by rows of (t, x1..xN) doubles and, if flagged, one byte per row.
struct BinaryHeader {
    static constexpr char magic[8] = {'S', 'T', 'K', 'Y', 'P', 'A', 'T', 'H'};
    static constexpr std::uint32_t version = 1;
    static constexpr std::size_t size = 64;
};

namespace detail {
template <typename T>
void put(unsigned char* buf, std::size_t offset, T v) {
    std::memcpy(buf + offset, &v, sizeof(T));
}
template <typename T>
T get(const unsigned char* buf, std::size_t offset) {
    T v;
    std::memcpy(&v, buf + offset, sizeof(T));
    return v;
}
} // namespace detail

/// Writes the 64-byte header used by path and kernel snapshot files.
inline void write_binary_header(std::ostream& os, std::uint32_t columns, std::uint64_t rows, double dt, std::uint64_t seed,
                                std::uint32_t flags) {
    unsigned char h[BinaryHeader::size] = {};
    std::memcpy(h, BinaryHeader::magic, 8);
    detail::put<std::uint32_t>(h, 8, BinaryHeader::version);
    detail::put<std::uint32_t>(h, 12, columns);
    detail::put<std::uint64_t>(h, 16, rows);
    detail::put<double>(h, 24, dt);
    detail::put<std::uint64_t>(h, 32, seed);
    detail::put<std::uint32_t>(h, 40, flags);
    os.write(reinterpret_cast<const char*>(h), BinaryHeader::size);
}

inline void write_binary(const Path& p, std::ostream& os) {
    write_binary_header(os, static_cast<std::uint32_t>(p.N), p.rows(), p.dt, p.seed, p.at_zero.empty() ? 0u : 1u);
    for (std::size_t k = 0; k < p.rows(); ++k) {
        os.write(reinterpret_cast<const char*>(&p.times[k]), sizeof(double));
        os.write(reinterpret_cast<const char*>(p.row(k)), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.N)));
    }
    if (!p.at_zero.empty()) os.write(reinterpret_cast<const char*>(p.at_zero.data()), static_cast<std::streamsize>(p.at_zero.size()));
    if (!os) throw Error("path: binary write failed");
}

inline Path read_binary(std::istream& is) {
    unsigned char h[BinaryHeader::size];
    if (!is.read(reinterpret_cast<char*>(h), BinaryHeader::size)) throw Error("path: truncated header");
    if (std::memcmp(h, BinaryHeader::magic, 8) != 0) throw Error("path: bad magic");
    if (detail::get<std::uint32_t>(h, 8) != BinaryHeader::version) throw Error("path: unsupported version");
    Path p;
    p.N = static_cast<int>(detail::get<std::uint32_t>(h, 12));
    auto rows = detail::get<std::uint64_t>(h, 16);
    p.dt = detail::get<double>(h, 24);
    p.seed = detail::get<std::uint64_t>(h, 32);
    bool flagged = detail::get<std::uint32_t>(h, 40) & 1u;
    p.times.resize(rows);
    p.states.resize(rows * static_cast<std::size_t>(p.N));
    for (std::size_t k = 0; k < rows; ++k) {
        is.read(reinterpret_cast<char*>(&p.times[k]), sizeof(double));
        is.read(reinterpret_cast<char*>(p.states.data() + k * static_cast<std::size_t>(p.N)),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.N)));
    }
    if (flagged) {
        p.at_zero.resize(rows);
        is.read(reinterpret_cast<char*>(p.at_zero.data()), static_cast<std::streamsize>(rows));
    }
    if (!is) throw Error("path: truncated body");
    return p;
}

} // namespace sticky
