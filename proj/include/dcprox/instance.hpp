#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcprox/problem.hpp"
#include "dcprox/rng.hpp"

namespace dcprox {

// Randomly generated least squares instance b = A xhat + noise * u.
struct ProblemInstance {
    Matrix A;
    Vector b;
    Vector xhat;
    std::uint64_t m = 0, n = 0, p = 0;
    std::uint64_t seed = 0;
};

// Draws an instance fully determined by the seed. Phases, in order: (1) A
// entries column by column, (2) support of size p by partial Fisher-Yates,
// (3) xhat values on the sorted support, (4) noise vector u. The Gaussian
// pair cache is reset between phases so each phase starts on a pair boundary.
inline ProblemInstance generate_instance(std::uint64_t m, std::uint64_t n, std::uint64_t p,
                                         double noise, std::uint64_t seed) {
    if (m < 1 || n < 1 || p < 1) throw std::invalid_argument("generate_instance: dims must be >= 1");
    if (p > n) throw std::invalid_argument("generate_instance: p exceeds n");

    Xoshiro256pp rng(seed);
    GaussianStream gauss(rng);

    ProblemInstance inst;
    inst.m = m;
    inst.n = n;
    inst.p = p;
    inst.seed = seed;

    const auto rows = static_cast<Eigen::Index>(m);
    const auto cols = static_cast<Eigen::Index>(n);

    inst.A.resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) inst.A(i, j) = gauss.next();
    for (Eigen::Index j = 0; j < cols; ++j) inst.A.col(j) /= inst.A.col(j).norm();
    gauss.reset_pair();

    std::vector<std::uint64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::uint64_t i = 0; i < p; ++i)
        std::swap(idx[i], idx[i + rng.uniform_below(n - i)]);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(p));

    inst.xhat = Vector::Zero(cols);
    for (std::uint64_t i = 0; i < p; ++i) inst.xhat[static_cast<Eigen::Index>(idx[i])] = gauss.next();
    gauss.reset_pair();

    Vector u(rows);
    for (Eigen::Index i = 0; i < rows; ++i) u[i] = gauss.next();
    inst.b = inst.A * inst.xhat + noise * u;
    return inst;
}

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "instance files are little-endian; byte swapping is not implemented");

inline void put_u64(std::string& buf, std::uint64_t v) {
    char raw[8];
    std::memcpy(raw, &v, 8);
    buf.append(raw, 8);
}

inline void put_f64(std::string& buf, double v) {
    char raw[8];
    std::memcpy(raw, &v, 8);
    buf.append(raw, 8);
}

inline std::uint64_t get_u64(const std::string& buf, std::size_t at) {
    std::uint64_t v;
    std::memcpy(&v, buf.data() + at, 8);
    return v;
}

inline double get_f64(const std::string& buf, std::size_t at) {
    double v;
    std::memcpy(&v, buf.data() + at, 8);
    return v;
}

}  // namespace detail

inline constexpr char kInstanceMagic[4] = {'D', 'C', 'P', 'X'};
inline constexpr unsigned char kInstanceVersion = 0x01;

// Serialized layout: magic "DCPX", version byte 0x01, u64 m, n, p, seed,
// then f64 arrays A (column-major), b, xhat. All little-endian.
inline std::string serialize_instance(const ProblemInstance& inst) {
    std::string buf;
    buf.reserve(37 + 8 * (inst.m * inst.n + inst.m + inst.n));
    buf.append(kInstanceMagic, 4);
    buf.push_back(static_cast<char>(kInstanceVersion));
    detail::put_u64(buf, inst.m);
    detail::put_u64(buf, inst.n);
    detail::put_u64(buf, inst.p);
    detail::put_u64(buf, inst.seed);
    for (Eigen::Index j = 0; j < inst.A.cols(); ++j)
        for (Eigen::Index i = 0; i < inst.A.rows(); ++i) detail::put_f64(buf, inst.A(i, j));
    for (Eigen::Index i = 0; i < inst.b.size(); ++i) detail::put_f64(buf, inst.b[i]);
    for (Eigen::Index i = 0; i < inst.xhat.size(); ++i) detail::put_f64(buf, inst.xhat[i]);
    return buf;
}

inline ProblemInstance parse_instance(const std::string& buf) {
    if (buf.size() < 37 || std::memcmp(buf.data(), kInstanceMagic, 4) != 0)
        throw std::runtime_error("instance file: magic mismatch");
    if (static_cast<unsigned char>(buf[4]) != kInstanceVersion)
        throw std::runtime_error("instance file: unsupported version");

    ProblemInstance inst;
    inst.m = detail::get_u64(buf, 5);
    inst.n = detail::get_u64(buf, 13);
    inst.p = detail::get_u64(buf, 21);
    inst.seed = detail::get_u64(buf, 29);
    if (inst.m < 1 || inst.n < 1 || inst.p > inst.n)
        throw std::runtime_error("instance file: invalid dimensions");
    const std::uint64_t want = 37 + 8 * (inst.m * inst.n + inst.m + inst.n);
    if (buf.size() != want) throw std::runtime_error("instance file: truncated or oversized payload");

    const auto rows = static_cast<Eigen::Index>(inst.m);
    const auto cols = static_cast<Eigen::Index>(inst.n);
    std::size_t at = 37;
    inst.A.resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i, at += 8) inst.A(i, j) = detail::get_f64(buf, at);
    inst.b.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i, at += 8) inst.b[i] = detail::get_f64(buf, at);
    inst.xhat.resize(cols);
    for (Eigen::Index i = 0; i < cols; ++i, at += 8) inst.xhat[i] = detail::get_f64(buf, at);
    return inst;
}

inline void save_instance(const ProblemInstance& inst, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const std::string buf = serialize_instance(inst);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ProblemInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_instance(buf);
}

// FNV-1a 64-bit content digest.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace dcprox
