#pragma once

// Negative sampling: persistent replay buffer plus K-step Langevin chains.
//
//   x0 ~ buffer with probability 1−ρ, else x0 ~ p0      (per row)
//   x_t = x_{t−1} − α·∂E(x_{t−1})/∂x + σ·N(0, I)        t = 1..K
//   x⁻  = x_K, detached from the parameter graph

#include "mebm/binary_io.hpp"
#include "mebm/energy_model.hpp"
#include "mebm/init_dist.hpp"
#include "mebm/matrix.hpp"
#include "mebm/rng.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace mebm {

struct SgldConfig {
    std::size_t steps = 5;      // K
    double step_size = 1.0;     // α
    double noise_scale = 0.001;  // σ
    std::optional<Range> clamp_range;

    void validate() const;
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t dim, double reinit_prob);

    std::size_t capacity() const { return capacity_; }
    std::size_t dim() const { return entries_.cols; }
    std::size_t size() const { return entries_.rows; }
    bool empty() const { return size() == 0; }
    double reinit_prob() const { return reinit_prob_; }
    std::span<const double> entry(std::size_t i) const { return entries_.row(i); }
    // Live rows only.
    const Matrix& entries() const { return entries_; }

    // Appends until full, then overwrites uniformly random slots.
    void push(const Matrix& samples, Rng& rng);

    void save(io::ByteWriter& out) const;
    static ReplayBuffer load(io::ByteReader& in);

    bool operator==(const ReplayBuffer&) const = default;

private:
    std::size_t capacity_;
    double reinit_prob_;
    Matrix entries_;
};

struct InitDraw {
    Matrix samples;
    std::size_t fresh_rows = 0;  // rows that came from p0
};

// Each row independently: a uniform buffer entry with probability 1−ρ, else a
// p0 draw. An empty buffer sends every row to p0.
InitDraw draw_init(const ReplayBuffer& buffer, const InitDistribution& p0, std::size_t count,
                   Rng& rng, std::optional<Range> init_clamp = std::nullopt);

// Maps a B×D batch to its B energies; must be differentiable in the input.
using EnergyFunction = std::function<Tensor(const Tensor&)>;

// Runs cfg.steps Langevin updates from x0. The returned states carry no graph.
// Throws DivergenceError(step, energy) on a non-finite energy or gradient.
Matrix sgld_chain(const EnergyFunction& energy, const Matrix& x0, const SgldConfig& cfg, Rng& rng);

// Same chain on a private, gradient-free copy of the model's parameters.
Matrix sgld_chain(const EnergyModel& model, const Matrix& x0, const SgldConfig& cfg, Rng& rng);

// Buffer dump: u64 count, u64 D, then row-major f64.
void write_buffer_dump(const std::filesystem::path& path, const Matrix& rows);
Matrix read_buffer_dump(const std::filesystem::path& path);

}  // namespace mebm
