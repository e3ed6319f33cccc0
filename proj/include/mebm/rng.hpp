#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mebm {

// A seeded random stream. Every consumer owns its own stream; streams are
// derived from one run seed by name so that adding draws in one component
// never shifts another component's sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Stream `name` of run `seed`.
    static Rng derive(std::uint64_t seed, std::string_view name);

    double uniform() { return unit_(engine_); }  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
    double normal() { return normal_(engine_); }
    bool bernoulli(double p) { return unit_(engine_) < p; }
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

    // Full state, including any cached normal deviate.
    std::string serialize() const;
    static Rng deserialize(const std::string& state);

    friend bool operator==(const Rng& a, const Rng& b) {
        return a.engine_ == b.engine_ && a.normal_ == b.normal_;
    }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// splitmix64 finalizer; also used to derive per-cell sweep seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mebm
