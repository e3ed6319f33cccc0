#pragma once

// Training configuration and its flat key=value text form.
//
// One key per line, '#' starts a comment, blank lines are ignored. Unknown
// keys are rejected with ConfigError naming the key.

#include "mebm/energy_model.hpp"
#include "mebm/sgld.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mebm {

enum class InitMode { Informative, Uniform, Mixture };

std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t iters_per_epoch = 390;
    std::size_t max_iters = 0;  // > 0 caps the run below epochs × iters_per_epoch
    std::size_t clf_batch = 128;
    std::size_t gen_batch = 64;
    double learning_rate = 1e-4;
    double momentum = 0.9;

    SgldConfig sgld;
    bool sgld_clamp_auto = true;  // clamp chains to the data range for raster data only

    std::size_t buffer_capacity = 10000;
    double reinit_prob = 0.05;  // ρ
    double reg_coeff = 0.05;
    double inject_sigma = 0.0;

    Mode mode = Mode::Uncond;
    InitMode init = InitMode::Informative;
    double eps_reg = 1e-4;
    bool init_clamp = true;

    std::size_t hidden_layers = 3;
    std::size_t hidden_width = 0;  // 0 = 128 for 2D data, 256 for raster data
    double leaky_slope = 0.2;

    bool augment = true;
    bool augment_gen_batch = false;  // ablation: also augment the likelihood batch
    double jitter_sigma = 0.01;

    std::uint64_t seed = 0;
    double divergence_threshold = 1e3;
    std::size_t divergence_window = 50;

    std::size_t sample_every = 0;  // iterations between sample grids; 0 = once per epoch
    std::size_t sample_count = 64;

    std::size_t total_iterations() const;
    void validate() const;

    // Canonical text, parseable by parse_config.
    std::string to_text() const;
};

TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// Applies one key=value pair; throws ConfigError for unknown keys or bad values.
void apply_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

}  // namespace mebm
