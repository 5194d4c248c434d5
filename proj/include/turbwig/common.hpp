#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <complex>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace turbwig {

using cplx = std::complex<double>;

// Argument/state validation. Throws std::invalid_argument so callers get the
// offending quantity spelled out instead of a bare assert.
inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

inline void require_runtime(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error(what);
}

// Locale-independent float formatting used by every writer that feeds a
// byte-compared artifact. %.17g round-trips IEEE doubles.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_g(double v, int prec) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

// FNV-1a, used for model/config hashes stored in container headers.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

// Signed FFT frequency for bin i of an n-point transform: 0,1,..,n/2-1,-n/2,..,-1.
inline long fft_signed_index(std::size_t i, std::size_t n) {
    return (i < n / 2 + n % 2) ? static_cast<long>(i)
                               : static_cast<long>(i) - static_cast<long>(n);
}

// Accumulates warnings from deep call sites (grid-resolution advisories and
// the like) without aborting the run. Thread-safe.
class Warnings {
public:
    void add(const std::string& msg) {
        std::lock_guard<std::mutex> lk(mu_);
        items_.push_back(msg);
    }
    std::vector<std::string> items() const {
        std::lock_guard<std::mutex> lk(mu_);
        return items_;
    }
    bool empty() const {
        std::lock_guard<std::mutex> lk(mu_);
        return items_.empty();
    }

private:
    mutable std::mutex mu_;
    std::vector<std::string> items_;
};

// Pairwise summation over a fixed binary tree. The addition order depends only
// on the element count, never on thread count or chunking, so reductions built
// on it are reproducible bit-for-bit on any machine/thread configuration.
template <class T>
T pairwise_sum(const T* data, std::size_t n) {
    if (n == 0) return T{};
    if (n <= 8) {
        T s = data[0];
        for (std::size_t i = 1; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(v.data(), v.size());
}

}  // namespace turbwig
