#include "mebm/energy_model.hpp"

#include "mebm/error.hpp"
#include "mebm/ops.hpp"
#include "mebm/rng.hpp"

#include <cmath>

namespace mebm {
namespace {

constexpr std::string_view kModelMagic = "EBMN";
constexpr std::uint32_t kModelVersion = 1;

Linear make_linear(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out), b(fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    for (double& v : b) v = rng.uniform(-bound, bound);
    return {Tensor::from({fan_in, fan_out}, std::move(w), true),
            Tensor::from({fan_out}, std::move(b), true)};
}

Linear copy_linear(const Linear& l) {
    return {Tensor::from(l.weight.shape(), {l.weight.values().begin(), l.weight.values().end()},
                         l.weight.requires_grad()),
            Tensor::from(l.bias.shape(), {l.bias.values().begin(), l.bias.values().end()},
                         l.bias.requires_grad())};
}

}  // namespace

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Uncond: return "uncond";
        case Mode::MJEM: return "mjem";
        case Mode::LSEJEM: return "lsejem";
    }
    return "?";
}

Mode parse_mode(std::string_view text) {
    if (text == "uncond") return Mode::Uncond;
    if (text == "mjem") return Mode::MJEM;
    if (text == "lsejem") return Mode::LSEJEM;
    throw ConfigError("unknown mode '" + std::string(text) + "' (uncond|mjem|lsejem)");
}

Tensor Linear::operator()(const Tensor& x) const { return ops::affine(x, weight, bias); }

EnergyModel::EnergyModel(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.input_dim == 0) throw ConfigError("model input dimension must be positive");
    if (spec_.mode != Mode::Uncond && spec_.num_classes == 0) {
        throw ConfigError(std::string(to_string(spec_.mode)) + " mode needs num_classes >= 1");
    }
    Rng rng = Rng::derive(spec_.seed, "model");
    std::size_t width = spec_.input_dim;
    for (std::size_t h : spec_.hidden) {
        if (h == 0) throw ConfigError("hidden layer width must be positive");
        trunk_.push_back(make_linear(width, h, rng));
        width = h;
    }
    if (spec_.mode != Mode::Uncond) classifier_ = make_linear(width, spec_.num_classes, rng);
    if (spec_.mode != Mode::LSEJEM) energy_head_ = make_linear(width, 1, rng);
}

std::size_t EnergyModel::feature_dim() const {
    return spec_.hidden.empty() ? spec_.input_dim : spec_.hidden.back();
}

void EnergyModel::check_input(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != spec_.input_dim) {
        throw ConfigError("model expects input [B x " + std::to_string(spec_.input_dim) +
                          "], got " + shape_str(x.shape()));
    }
}

Tensor EnergyModel::features(const Tensor& x) const {
    check_input(x);
    Tensor h = x;
    for (const Linear& layer : trunk_) h = ops::leaky_relu(layer(h), spec_.slope);
    return h;
}

Tensor EnergyModel::logits(const Tensor& x) const {
    if (!classifier_) throw ConfigError("uncond model has no classifier head");
    return (*classifier_)(features(x));
}

EnergyModel::Outputs EnergyModel::forward(const Tensor& x) const {
    Tensor f = features(x);
    const std::size_t batch = x.dim(0);
    std::optional<Tensor> logit;
    if (classifier_) logit = (*classifier_)(f);
    Tensor e = energy_head_ ? ops::reshape((*energy_head_)(f), {batch})
                            : ops::scale(ops::logsumexp(*logit), -1.0);
    return {std::move(f), std::move(logit), std::move(e)};
}

Tensor EnergyModel::energy(const Tensor& x) const { return forward(x).energy; }

Tensor EnergyModel::class_posterior(const Tensor& x) const { return ops::softmax(logits(x)); }

std::vector<NamedParameter> EnergyModel::parameters() const {
    std::vector<NamedParameter> out;
    for (std::size_t i = 0; i < trunk_.size(); ++i) {
        out.push_back({"trunk." + std::to_string(i) + ".weight", trunk_[i].weight});
        out.push_back({"trunk." + std::to_string(i) + ".bias", trunk_[i].bias});
    }
    if (classifier_) {
        out.push_back({"classifier.weight", classifier_->weight});
        out.push_back({"classifier.bias", classifier_->bias});
    }
    if (energy_head_) {
        out.push_back({"energy_head.weight", energy_head_->weight});
        out.push_back({"energy_head.bias", energy_head_->bias});
    }
    return out;
}

std::size_t EnergyModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
}

void EnergyModel::set_requires_grad(bool flag) {
    for (auto& p : parameters()) p.tensor.set_requires_grad(flag);
}

void EnergyModel::zero_grad() {
    for (auto& p : parameters()) p.tensor.zero_grad();
}

EnergyModel EnergyModel::clone() const {
    EnergyModel copy = *this;
    for (auto& l : copy.trunk_) l = copy_linear(l);
    if (copy.classifier_) copy.classifier_ = copy_linear(*copy.classifier_);
    if (copy.energy_head_) copy.energy_head_ = copy_linear(*copy.energy_head_);
    return copy;
}

void EnergyModel::save(io::ByteWriter& out) const {
    out.magic(kModelMagic);
    out.u32(kModelVersion);
    out.u32(static_cast<std::uint32_t>(spec_.mode));
    out.u64(spec_.input_dim);
    out.u64(spec_.hidden.size());
    for (std::size_t h : spec_.hidden) out.u64(h);
    out.u64(spec_.num_classes);
    out.f64(spec_.slope);
    out.u64(spec_.seed);
    const auto params = parameters();
    out.u64(params.size());
    for (const auto& p : params) {
        out.str(p.name);
        out.u64(p.tensor.rank());
        for (std::size_t e : p.tensor.shape()) out.u64(e);
        out.f64_array(p.tensor.values());
    }
}

EnergyModel EnergyModel::load(io::ByteReader& in) {
    in.expect_magic(kModelMagic);
    if (const auto v = in.u32("model version"); v != kModelVersion) {
        throw DataError("unsupported model version " + std::to_string(v));
    }
    ModelSpec spec;
    const std::uint32_t mode = in.u32("mode");
    if (mode > 2) throw DataError("bad model mode " + std::to_string(mode));
    spec.mode = static_cast<Mode>(mode);
    spec.input_dim = in.u64("input_dim");
    spec.hidden.resize(in.u64("layer count"));
    for (auto& h : spec.hidden) h = in.u64("layer width");
    spec.num_classes = in.u64("num_classes");
    spec.slope = in.f64("slope");
    spec.seed = in.u64("seed");

    EnergyModel model(spec);
    auto params = model.parameters();
    if (in.u64("parameter count") != params.size()) throw DataError("parameter count mismatch");
    for (auto& p : params) {
        const std::string name = in.str("parameter name");
        if (name != p.name) throw DataError("expected parameter " + p.name + ", found " + name);
        Shape shape(in.u64("rank"));
        for (auto& e : shape) e = in.u64("extent");
        if (shape != p.tensor.shape()) throw DataError("shape mismatch for " + name);
        const auto values = in.f64_array(name);
        if (values.size() != p.tensor.numel()) throw DataError("payload mismatch for " + name);
        std::copy(values.begin(), values.end(), p.tensor.mutable_values().begin());
    }
    return model;
}

}  // namespace mebm
