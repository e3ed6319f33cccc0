#pragma once

// The training loop. Each step:
//   1. x0 from the replay buffer (prob 1−ρ) or p0, per row
//   2. K Langevin steps, result detached
//   3. loss: regularized contrastive term on the clean batch, plus
//      cross-entropy on the augmented batch when a classifier head exists
//   4. backward, SGD-with-momentum update
//   5. negatives pushed to the buffer

#include "mebm/config.hpp"
#include "mebm/datasets.hpp"
#include "mebm/energy_model.hpp"
#include "mebm/init_dist.hpp"
#include "mebm/objectives.hpp"
#include "mebm/rng.hpp"
#include "mebm/sgld.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mebm {

// v ← momentum·v + g;  θ ← θ − lr·v
class SgdMomentum {
public:
    SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}

    void step(std::span<const NamedParameter> params);

    const std::vector<std::vector<double>>& velocity() const { return velocity_; }
    void set_velocity(std::vector<std::vector<double>> v) { velocity_ = std::move(v); }

private:
    double lr_;
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

struct MonitorResult {
    bool diverged = false;
    std::size_t iteration = 0;  // index of the offending row
    std::string reason;
};

// Diverged at the first row that is non-finite, or at the last row of the
// first full window whose mean |E⁺ − E⁻| exceeds `threshold`.
MonitorResult divergence_monitor(std::span<const LossBreakdown> history, double threshold,
                                 std::size_t window);

struct TrainState {
    EnergyModel model;
    InitDistribution p0;
    ReplayBuffer buffer;
    SgdMomentum optimizer;
    std::size_t iteration = 0;
    std::vector<LossBreakdown> history;
    Rng data_rng;
    Rng sgld_rng;
    Rng init_rng;
    Rng augment_rng;
    Matrix last_negatives;
    std::optional<Range> sgld_clamp;   // resolved from config + data kind
    std::optional<Range> init_clamp;

    void save(const std::filesystem::path& path, const TrainConfig& cfg) const;
    void save(io::ByteWriter& out, const TrainConfig& cfg) const;
    // Restores the state and the config it was written with.
    static std::pair<TrainState, TrainConfig> load(const std::filesystem::path& path);
    static std::pair<TrainState, TrainConfig> load(io::ByteReader& in);
};

// Fits p0 on the dataset and builds a fresh model, buffer and optimizer.
TrainState init_state(const TrainConfig& cfg, const Dataset& data);

// One full step on already-assembled batches. Throws DivergenceError on a
// non-finite loss or when the monitor trips, InvariantError when the likelihood
// batch's augmentation tag disagrees with the config.
LossBreakdown train_step(TrainState& state, const Batch& batch_clf, const Batch& batch_gen,
                         const TrainConfig& cfg);

// Draws (clf, gen) batches for one step: the clf batch is augmented, the gen
// batch stays clean unless cfg.augment_gen_batch.
std::pair<Batch, Batch> next_batches(TrainState& state, const Dataset& data, const TrainConfig& cfg);

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // metrics.csv, checkpoint.bin, samples
    std::function<void(const TrainState&, const LossBreakdown&)> on_step;
};

// Continues `state` until `until_iteration` total steps have run.
void run_training(TrainState& state, const TrainConfig& cfg, const Dataset& data,
                  std::size_t until_iteration, const RunOptions& options = {});

// init_state + run_training over cfg.total_iterations().
TrainState train_loop(const TrainConfig& cfg, const Dataset& data, const RunOptions& options = {});

std::string metrics_csv_header(Mode mode);
std::string metrics_csv_row(std::size_t iteration, const LossBreakdown& b, Mode mode);

}  // namespace mebm
