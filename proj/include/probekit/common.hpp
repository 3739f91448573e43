#pragma once

#include <cctype>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace probekit {

// ---------------------------------------------------------------------------
// Error types. Every failure mode has a named type so callers (and tests)
// can catch exactly what they expect.
// ---------------------------------------------------------------------------

#define PROBEKIT_ERROR(NAME)                                   \
    struct NAME : std::runtime_error {                         \
        explicit NAME(const std::string& msg)                  \
            : std::runtime_error(std::string(#NAME ": ") + msg) {} \
    }

PROBEKIT_ERROR(EmptyInput);
PROBEKIT_ERROR(TextTooLong);
PROBEKIT_ERROR(LayerOutOfRange);
PROBEKIT_ERROR(ModelLoadFailure);
PROBEKIT_ERROR(PrecisionUnsupported);
PROBEKIT_ERROR(CorruptManifest);
PROBEKIT_ERROR(ShapeMismatch);
PROBEKIT_ERROR(AllMasked);
PROBEKIT_ERROR(LayerNotInStore);
PROBEKIT_ERROR(SingleClassTraining);
PROBEKIT_ERROR(DimensionMismatch);
PROBEKIT_ERROR(EmptyTestSet);
PROBEKIT_ERROR(StoreMismatch);
PROBEKIT_ERROR(AllCellsFailed);
PROBEKIT_ERROR(CutLayerOutOfRange);
PROBEKIT_ERROR(HeadDimensionMismatch);
PROBEKIT_ERROR(EmptyText);
PROBEKIT_ERROR(EmptyDataset);
PROBEKIT_ERROR(InsufficientSamples);
PROBEKIT_ERROR(LengthConstraintViolated);
PROBEKIT_ERROR(DistributionDrift);
PROBEKIT_ERROR(OutputNotWritable);
PROBEKIT_ERROR(DeviceUnavailable);
PROBEKIT_ERROR(ConfigParseError);

#undef PROBEKIT_ERROR

// ---------------------------------------------------------------------------
// Deterministic RNG. All randomness in the toolkit flows through this class;
// the distributions are hand-rolled on top of mt19937_64 so that a given seed
// produces the same stream on every platform and across process restarts.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(gen_() % span);
    }

    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a) for stable text -> id mapping and seed derivation.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline uint64_t fnv1a64(const std::vector<size_t>& v) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t x : v) h = fnv1a64(&x, sizeof(x), h);
    return h;
}

// ---------------------------------------------------------------------------
// Little-endian binary IO. Shapes are row-major; all multi-byte values LE.
// ---------------------------------------------------------------------------

template <typename T>
void write_le(std::ostream& os, const T* data, size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    // Host is little-endian on every supported target; memcpy keeps it UB-free.
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_le(std::istream& is, T* data, size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

// Half-precision conversions used by the model file format.
inline uint16_t f32_to_f16(float f) {
    uint32_t x;
    std::memcpy(&x, &f, 4);
    const uint32_t sign = (x >> 16) & 0x8000u;
    int32_t exp = static_cast<int32_t>((x >> 23) & 0xff) - 127 + 15;
    uint32_t mant = x & 0x7fffffu;
    if (exp <= 0) return static_cast<uint16_t>(sign);  // flush subnormals
    if (exp >= 31) return static_cast<uint16_t>(sign | 0x7c00u);
    return static_cast<uint16_t>(sign | (static_cast<uint32_t>(exp) << 10) | (mant >> 13));
}

inline float f16_to_f32(uint16_t h) {
    const uint32_t sign = (h & 0x8000u) << 16;
    const uint32_t exp = (h >> 10) & 0x1f;
    const uint32_t mant = h & 0x3ffu;
    uint32_t x;
    if (exp == 0) {
        x = sign;  // subnormals flushed on the encode side
    } else if (exp == 31) {
        x = sign | 0x7f800000u | (mant << 13);
    } else {
        x = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float f;
    std::memcpy(&f, &x, 4);
    return f;
}

inline uint16_t f32_to_bf16(float f) {
    uint32_t x;
    std::memcpy(&x, &f, 4);
    return static_cast<uint16_t>(x >> 16);  // truncation, not round-to-nearest
}

inline float bf16_to_f32(uint16_t b) {
    const uint32_t x = static_cast<uint32_t>(b) << 16;
    float f;
    std::memcpy(&f, &x, 4);
    return f;
}

// ---------------------------------------------------------------------------
// Small file helpers.
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file: " + path);
    std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw OutputNotWritable(path);
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw OutputNotWritable(path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw OutputNotWritable(path);
}

inline std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n\f\v");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

// printf-style formatting into std::string (no std::format on GCC 11).
inline std::string strfmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
inline std::string strfmt(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[1024];
    vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

}  // namespace probekit
