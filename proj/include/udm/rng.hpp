#pragma once

#include <cmath>
#include <cstdint>

namespace udm {

// Counter-free splitmix64 stream. All randomness in the project flows from a
// single master seed through child() derivations (run -> group -> rollout ->
// step), so runs are reproducible bit-for-bit from (config, seed) alone.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [0, n)
    int next_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    bool next_bernoulli(double p) { return next_double() < p; }

    double next_gauss() {
        // Box-Muller, one sample per call (second value discarded to keep the
        // stream position a simple function of call count).
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Derive an independent child stream. Different salts give different
    // streams; advancing the parent does not perturb already-derived children.
    Rng child(uint64_t salt) const {
        uint64_t z = state_ ^ (salt * 0xd1342543de82ef95ULL + 0x63652362eafe4b1dULL);
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
        return Rng(z ^ (z >> 33));
    }

private:
    uint64_t state_;
};

}  // namespace udm
