#pragma once

// Post-training helpers shared by the command-line tool and the acceptance
// suite: fresh-chain sampling, the evaluation report, and the stability sweep.

#include "mebm/config.hpp"
#include "mebm/datasets.hpp"
#include "mebm/eval.hpp"
#include "mebm/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mebm {

// p0 draws pushed through a K-step chain with the state's resolved clamps.
// `steps` overrides K when nonzero.
Matrix fresh_chain_samples(const TrainState& state, const TrainConfig& cfg, std::size_t count, Rng& rng,
                           std::size_t steps = 0);

struct EvalOptions {
    std::size_t sample_count = 2000;
    std::size_t histogram_bins = 40;
    MmdEstimator estimator = MmdEstimator::Biased;
};

struct EvalArtifacts {
    EvalReport report;
    double reference_mmd = 0.0;  // between two disjoint halves of the held-out set
    Matrix generated;
    HistogramTable histogram;
    ManifoldReport manifold;
};

// Compares fresh-chain samples against the first half of `heldout`; the
// second half supplies the real-vs-real reference. Needs 2·sample_count
// held-out rows.
EvalArtifacts evaluate(const TrainState& state, const TrainConfig& cfg, const Dataset& heldout, Rng& rng,
                       const EvalOptions& options = {});

enum class CellStatus { Healthy, Diverged, Error };

std::string_view to_string(CellStatus status);

struct StabilityCell {
    std::size_t k = 0;
    InitMode init = InitMode::Informative;
    std::uint64_t seed = 0;
    CellStatus status = CellStatus::Healthy;
    std::size_t iterations = 0;  // steps completed
    std::int64_t diverged_at = -1;
    double final_gap = 0.0;      // mean |E⁺ − E⁻| over the last window; +inf when diverged
    std::string message;
};

struct StabilityGrid {
    std::vector<std::size_t> ks;
    std::vector<InitMode> inits;
    std::vector<std::uint64_t> seeds;
    std::size_t max_iters = 0;  // 0 keeps the config's length
};

// Runs one capped training per (K, init, seed) cell on up to `threads`
// workers. Training errors are recorded in the cell, never thrown. Rows come
// back in (K, init, seed) order regardless of scheduling.
std::vector<StabilityCell> bench_stability(const TrainConfig& base, const Dataset& data, const StabilityGrid& grid,
                                           std::size_t threads);

std::string stability_csv(const std::vector<StabilityCell>& cells);
// One row per (K, init): runs, healthy, diverged, errors, divergence_rate, median_final_gap.
std::string stability_summary_csv(const std::vector<StabilityCell>& cells);

// EBM_THREADS when set and positive, else the hardware concurrency (at least 1).
std::size_t worker_threads();

}  // namespace mebm
