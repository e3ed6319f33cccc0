#include "mebm/objectives.hpp"

#include "mebm/error.hpp"
#include "mebm/ops.hpp"

#include <cmath>

namespace mebm {
namespace {

double mean_of(std::span<const double> v, bool squared) {
    double s = 0.0;
    for (double x : v) s += squared ? x * x : x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void fill_energy_stats(LossBreakdown& b, const Tensor& e_pos, const Tensor& e_neg) {
    b.e_pos_mean = mean_of(e_pos.values(), false);
    b.e_neg_mean = mean_of(e_neg.values(), false);
    b.e_pos_sq_mean = mean_of(e_pos.values(), true);
    b.e_neg_sq_mean = mean_of(e_neg.values(), true);
}

}  // namespace

bool LossBreakdown::finite() const {
    return std::isfinite(gen_loss) && (!clf_loss || std::isfinite(*clf_loss)) &&
           std::isfinite(e_pos_mean) && std::isfinite(e_neg_mean) && std::isfinite(e_pos_sq_mean) &&
           std::isfinite(e_neg_sq_mean) && std::isfinite(total);
}

Tensor cd_l2_loss(const Tensor& e_pos, const Tensor& e_neg, double reg_coeff) {
    if (e_pos.shape() != e_neg.shape()) {
        throw ConfigError("cd_l2_loss: batch mismatch " + shape_str(e_pos.shape()) + " vs " +
                          shape_str(e_neg.shape()));
    }
    if (!(reg_coeff >= 0.0)) throw ConfigError("cd_l2_loss: reg_coeff must be >= 0");
    Tensor per_row = e_pos - e_neg;
    if (reg_coeff > 0.0) per_row = per_row + reg_coeff * (ops::square(e_pos) + ops::square(e_neg));
    return ops::mean(per_row);
}

Loss generative_loss(const EnergyModel& model, const Tensor& x_gen_pos, const Tensor& x_gen_neg,
                     double reg_coeff) {
    const Tensor e_pos = model.energy(x_gen_pos);
    const Tensor e_neg = model.energy(x_gen_neg);
    Tensor gen = cd_l2_loss(e_pos, e_neg, reg_coeff);
    Loss out{gen, {}};
    fill_energy_stats(out.breakdown, e_pos, e_neg);
    out.breakdown.gen_loss = gen.item();
    out.breakdown.total = gen.item();
    return out;
}

Loss joint_loss(const EnergyModel& model, const Tensor& x_clf, std::span<const std::int32_t> labels,
                const Tensor& x_gen_pos, const Tensor& x_gen_neg, double reg_coeff) {
    if (model.mode() == Mode::Uncond) {
        throw ConfigError("joint_loss needs a classifier head; use generative_loss for uncond");
    }
    const Tensor logits = model.logits(x_clf);
    const Tensor clf = ops::softmax_cross_entropy(logits, labels);
    Loss gen = generative_loss(model, x_gen_pos, x_gen_neg, reg_coeff);

    std::size_t correct = 0;
    const std::size_t classes = logits.dim(1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* row = logits.values().data() + i * classes;
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (row[j] > row[best]) best = j;
        if (static_cast<std::int32_t>(best) == labels[i]) ++correct;
    }

    Loss out{clf + gen.total, gen.breakdown};
    out.breakdown.clf_loss = clf.item();
    out.breakdown.total = out.total.item();
    out.breakdown.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    return out;
}

Tensor inject_noise(const Tensor& x, double sigma_data, Rng& rng) {
    if (!(sigma_data >= 0.0)) throw ConfigError("inject_noise: sigma must be >= 0");
    std::vector<double> v(x.values().begin(), x.values().end());
    if (sigma_data > 0.0) {
        for (double& e : v) e += sigma_data * rng.normal();
    }
    return Tensor::from(x.shape(), std::move(v));
}

}  // namespace mebm
