#pragma once

/**
 * rng.hpp — deterministic random sources.
 *
 * Every randomized search in the toolkit draws from an explicitly seeded
 * stream. Gaussian variates are produced by our own Box-Muller so that the
 * byte-for-byte sequence is fixed by this file alone (library distributions
 * keep unspecified internal state). Derived streams are obtained by mixing
 * tags into the seed, which makes results independent of evaluation order.
 */

#include <cstdint>
#include <cstring>
#include <random>

#include "opspace/matrix.hpp"
#include "opspace/svd.hpp"

namespace opspace {

/// splitmix64 finalizer; good avalanche for seed derivation.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 1 | b >> 63);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over raw bytes, for hashing numeric payloads into seeds.
inline uint64_t hash_bytes(const void* p, size_t n, uint64_t seed = 0xcbf29ce484222325ULL) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : g_(seed) {}

    uint64_t u64() { return g_(); }

    /// Uniform in [0, 1).
    double uniform() { return (g_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (cached pair).
    double gauss() {
        if (have_) {
            have_ = false;
            return cached_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_ = true;
        return r * std::cos(a);
    }

    cplx cgauss() {
        const double re = gauss();
        const double im = gauss();
        return cplx(re, im) * 0.7071067811865475244;
    }

    CMat gaussian(int rows, int cols) {
        CMat m(rows, cols);
        for (auto& v : m.data()) v = cgauss();
        return m;
    }

    /// Haar-ish unitary via orthonormalization of a Gaussian matrix.
    CMat unitary(int n) {
        CMat g = gaussian(n, n);
        // Modified Gram-Schmidt with one re-orthogonalization pass.
        for (int j = 0; j < n; ++j) {
            for (int pass = 0; pass < 2; ++pass)
                for (int c = 0; c < j; ++c) {
                    cplx ip = 0;
                    for (int i = 0; i < n; ++i) ip += std::conj(g(i, c)) * g(i, j);
                    for (int i = 0; i < n; ++i) g(i, j) -= ip * g(i, c);
                }
            double nrm = 0;
            for (int i = 0; i < n; ++i) nrm += std::norm(g(i, j));
            nrm = std::sqrt(nrm);
            if (nrm < 1e-12) {
                g(j, j) += 1.0; // degenerate draw; nudge and renormalize
                nrm = 0;
                for (int i = 0; i < n; ++i) nrm += std::norm(g(i, j));
                nrm = std::sqrt(nrm);
            }
            for (int i = 0; i < n; ++i) g(i, j) /= nrm;
        }
        return g;
    }

    /// Derived deterministic stream; independent of call order elsewhere.
    Rng fork(uint64_t tag) { return Rng(mix_seed(g_(), tag)); }

  private:
    std::mt19937_64 g_;
    bool have_ = false;
    double cached_ = 0;
};

/// Seed contribution of a numeric payload (e.g. element coordinates), so that
/// oracle answers are a pure function of (seed, query).
inline uint64_t hash_doubles(const std::vector<cplx>& v, uint64_t seed) {
    if (v.empty()) return mix_seed(seed, 0x9e37);
    return hash_bytes(v.data(), v.size() * sizeof(cplx), seed ^ 0xcbf29ce484222325ULL);
}

} // namespace opspace
