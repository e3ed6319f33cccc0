#pragma once

#include "mebm/energy_model.hpp"
#include "mebm/rng.hpp"
#include "mebm/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace mebm {

struct LossBreakdown {
    double gen_loss = 0.0;
    std::optional<double> clf_loss;
    double e_pos_mean = 0.0;
    double e_neg_mean = 0.0;
    double e_pos_sq_mean = 0.0;
    double e_neg_sq_mean = 0.0;
    double total = 0.0;
    std::optional<double> accuracy;  // on the classification batch

    double energy_gap() const { return e_pos_mean - e_neg_mean; }
    bool finite() const;
    bool operator==(const LossBreakdown&) const = default;
};

// mean_i( E⁺_i − E⁻_i + reg_coeff·((E⁺_i)² + (E⁻_i)²) )
Tensor cd_l2_loss(const Tensor& e_pos, const Tensor& e_neg, double reg_coeff);

struct Loss {
    Tensor total;
    LossBreakdown breakdown;
};

// Classification on the (augmented) x_clf batch plus the regularized
// contrastive term on the clean positive batch and the sampled negatives.
// Requires a model with a classifier head.
Loss joint_loss(const EnergyModel& model, const Tensor& x_clf, std::span<const std::int32_t> labels,
                const Tensor& x_gen_pos, const Tensor& x_gen_neg, double reg_coeff);

// Likelihood term only (no classification batch); valid in every mode.
Loss generative_loss(const EnergyModel& model, const Tensor& x_gen_pos, const Tensor& x_gen_neg,
                     double reg_coeff);

// x + N(0, sigma_data²·I); sigma_data = 0 returns a copy of x.
Tensor inject_noise(const Tensor& x, double sigma_data, Rng& rng);

}  // namespace mebm
