#include "hafno/util/rng.hpp"

namespace hafno {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    for (unsigned char ch : purpose) h = splitmix64(h ^ ch);
    return splitmix64(h ^ splitmix64(index + 0x51ed270b27e1ULL));
}

}  // namespace hafno
