#include "mebm/rng.hpp"

#include "mebm/error.hpp"

#include <sstream>

namespace mebm {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::string_view name) {
    // FNV-1a over the stream name.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return Rng(mix64(mix64(seed) ^ h));
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw ConfigError("Rng::index on an empty range");
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_ << ' ' << normal_;
    return os.str();
}

Rng Rng::deserialize(const std::string& state) {
    Rng r;
    std::istringstream is(state);
    is >> r.engine_ >> r.normal_;
    if (!is) throw DataError("corrupt random-stream state");
    return r;
}

}  // namespace mebm
