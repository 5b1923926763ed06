#pragma once

#include <cmath>
#include <cstdint>

namespace mapmom {

// Per-path random stream: SplitMix64 sequence keyed by (master seed, stream
// index).  Streams are counter-derived, so path k's draws do not depend on
// how many other paths ran or in which order.  With `antithetic` every
// uniform is reflected to 1-u.
class RngStream {
  public:
    RngStream(uint64_t master_seed, uint64_t stream_index, bool antithetic = false)
        : antithetic_(antithetic) {
        state_ = mix(master_seed + 0x9E3779B97F4A7C15ULL * (stream_index + 1));
        state_ = mix(state_ ^ 0xBF58476D1CE4E5B9ULL);
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // uniform on (0,1); never returns an exact endpoint
    double uniform() {
        const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        return antithetic_ ? 1.0 - u : u;
    }

    // standard normal, Box-Muller with cached second draw
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

  private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t state_;
    bool antithetic_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace mapmom
