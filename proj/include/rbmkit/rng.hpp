#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace rbmkit {

// Philox4x32-10 counter-based generator (Salmon et al. construction).
// Every output is a pure function of (key, counter), so any work
// partitioning scheme sees the same stream: the noise attached to
// (seed, path, step) never depends on which worker computes it.
struct Philox4x32 {
    std::array<std::uint32_t, 2> key;

    explicit Philox4x32(std::uint64_t seed) {
        // splitmix64 to decorrelate nearby seeds
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z = z ^ (z >> 31);
        key = {static_cast<std::uint32_t>(z), static_cast<std::uint32_t>(z >> 32)};
    }

    static void round(std::array<std::uint32_t, 4>& c, std::array<std::uint32_t, 2>& k) {
        const std::uint64_t p0 = 0xD2511F53ULL * c[0];
        const std::uint64_t p1 = 0xCD9E8D57ULL * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
             static_cast<std::uint32_t>(p0)};
        k[0] += 0x9E3779B9U;
        k[1] += 0xBB67AE85U;
    }

    std::array<std::uint32_t, 4> operator()(std::uint64_t ctr_hi, std::uint64_t ctr_lo) const {
        std::array<std::uint32_t, 4> c = {
            static_cast<std::uint32_t>(ctr_lo), static_cast<std::uint32_t>(ctr_lo >> 32),
            static_cast<std::uint32_t>(ctr_hi), static_cast<std::uint32_t>(ctr_hi >> 32)};
        std::array<std::uint32_t, 2> k = key;
        for (int r = 0; r < 10; ++r) round(c, k);
        return c;
    }
};

/// Stateless stream of uniforms/gaussians addressed by (path, step, slot).
///
/// `purpose` separates independent uses sharing one user seed (dynamics noise,
/// initial-condition sampling, null calibration, ...).
class NoiseKernel {
public:
    enum Purpose : std::uint64_t {
        kDynamics = 0x11,
        kInitial = 0x22,
        kLawSampler = 0x33,
        kNullCalib = 0x44,
        kScratch = 0x55,
    };

    NoiseKernel(std::uint64_t seed, std::uint64_t purpose)
        : gen_(seed ^ (purpose * 0xA24BAED4963EE407ULL)) {}

    // Two uniforms in (0,1), 53-bit resolution, never exactly 0 or 1.
    std::array<double, 2> uniform_pair(std::uint64_t path, std::uint64_t step,
                                       std::uint64_t slot) const {
        const auto w = gen_(path, (step << 24) ^ slot);
        const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
        constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
        return {(static_cast<double>(a >> 11) + 0.5) * scale,
                (static_cast<double>(b >> 11) + 0.5) * scale};
    }

    // Two independent N(0,1) draws via Box-Muller.
    std::array<double, 2> gaussian_pair(std::uint64_t path, std::uint64_t step,
                                        std::uint64_t slot) const {
        const auto u = uniform_pair(path, step, slot);
        const double r = std::sqrt(-2.0 * std::log(u[0]));
        const double th = 6.283185307179586476925286766559 * u[1];
        return {r * std::cos(th), r * std::sin(th)};
    }

    void fill_gaussian(std::uint64_t path, std::uint64_t step, double* out, int n) const {
        for (int i = 0; i < n; i += 2) {
            const auto z = gaussian_pair(path, step, static_cast<std::uint64_t>(i / 2));
            out[i] = z[0];
            if (i + 1 < n) out[i + 1] = z[1];
        }
    }

    double uniform(std::uint64_t path, std::uint64_t step, std::uint64_t slot) const {
        return uniform_pair(path, step, slot)[0];
    }

    double exponential(double rate, std::uint64_t path, std::uint64_t step,
                       std::uint64_t slot) const {
        return -std::log(uniform(path, step, slot)) / rate;
    }

private:
    Philox4x32 gen_;
};

}  // namespace rbmkit
