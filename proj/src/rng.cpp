#include "ctxinsert/rng.hpp"

#include <cmath>

#include "ctxinsert/errors.hpp"

namespace ctxinsert {

uint64_t mix_seed(uint64_t value) {
    value += 0x9e3779b97f4a7c15ULL;
    value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
    value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
    return value ^ (value >> 31);
}

double SeededRng::normal() {
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

size_t SeededRng::index(size_t n) {
    if (n == 0) throw ContractViolationError("SeededRng::index called with n == 0");
    // Lemire's multiply-shift rejection method.
    uint64_t bound = n;
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<uint64_t>(m);
    if (low < bound) {
        uint64_t threshold = (0ULL - bound) % bound;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<uint64_t>(m);
        }
    }
    return static_cast<size_t>(m >> 64);
}

}  // namespace ctxinsert
