#pragma once

#include <cstdint>
#include <cmath>

namespace turbwig {

// Philox4x32-10 counter-based generator.
//
// Every draw is a pure function of (seed, stream, index), so field modes,
// screen pixels and ray steps can be generated in any order, from any thread,
// and still produce identical realizations. That property is what makes the
// bit-reproducibility guarantees of the synthesis and Monte Carlo code hold
// independently of the worker count.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          ctr2_(static_cast<std::uint32_t>(stream)),
          ctr3_(static_cast<std::uint32_t>(stream >> 32)) {}

    struct Block {
        std::uint32_t x[4];
    };

    // One 128-bit block for counter value `index`.
    Block block(std::uint64_t index) const {
        std::uint32_t c0 = static_cast<std::uint32_t>(index);
        std::uint32_t c1 = static_cast<std::uint32_t>(index >> 32);
        std::uint32_t c2 = ctr2_, c3 = ctr3_;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ull * c0;
            const std::uint64_t p1 = 0xCD9E8D57ull * c2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            const std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return Block{{c0, c1, c2, c3}};
    }

    // Two uniforms in (0,1), each from 32 bits of one block.
    void uniforms2(std::uint64_t index, double& u0, double& u1) const {
        const Block b = block(index);
        const std::uint64_t a = (static_cast<std::uint64_t>(b.x[0]) << 32) | b.x[1];
        const std::uint64_t c = (static_cast<std::uint64_t>(b.x[2]) << 32) | b.x[3];
        // 53-bit mantissas, offset by half an ulp so 0 is never produced.
        u0 = (static_cast<double>(a >> 11) + 0.5) * (1.0 / 9007199254740992.0);
        u1 = (static_cast<double>(c >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // Standard normal pair via Box-Muller (rejection-free, hence one block
    // per pair and a fixed draw count per site).
    void gaussians2(std::uint64_t index, double& g0, double& g1) const {
        double u0, u1;
        uniforms2(index, u0, u1);
        const double r = std::sqrt(-2.0 * std::log(u0));
        const double t = 6.283185307179586476925286766559 * u1;
        g0 = r * std::cos(t);
        g1 = r * std::sin(t);
    }

private:
    std::uint32_t key0_, key1_, ctr2_, ctr3_;
};

}  // namespace turbwig
