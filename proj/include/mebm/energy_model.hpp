#pragma once

#include "mebm/binary_io.hpp"
#include "mebm/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mebm {

// Which heads the model carries and how energy is read off them.
enum class Mode {
    Uncond,  // energy head only
    MJEM,    // classifier head + energy head on a shared trunk
    LSEJEM,  // classifier head only; energy = −logsumexp(logits)
};

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct Linear {
    Tensor weight;  // [fan_in × fan_out]
    Tensor bias;    // [fan_out]

    Tensor operator()(const Tensor& x) const;
};

struct ModelSpec {
    Mode mode = Mode::Uncond;
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden{128, 128, 128};
    std::size_t num_classes = 0;
    double slope = 0.2;
    std::uint64_t seed = 0;

    bool operator==(const ModelSpec&) const = default;
};

struct NamedParameter {
    std::string name;
    Tensor tensor;
};

// MLP trunk with optional classifier and energy heads.
//
// The trunk is a stack of affine + leaky_relu layers; its last activation is
// the feature vector. Both heads read the features directly and the energy
// head is a raw affine scalar.
class EnergyModel {
public:
    // Parameters drawn uniformly in ±1/√fan_in from the "model" stream of spec.seed.
    explicit EnergyModel(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    Mode mode() const { return spec_.mode; }
    std::size_t input_dim() const { return spec_.input_dim; }
    std::size_t feature_dim() const;
    std::size_t num_classes() const { return spec_.num_classes; }

    Tensor features(const Tensor& x) const;
    Tensor logits(const Tensor& x) const;
    // Shape [B].
    Tensor energy(const Tensor& x) const;
    Tensor class_posterior(const Tensor& x) const;

    // Both heads from one trunk pass.
    struct Outputs {
        Tensor features;
        std::optional<Tensor> logits;
        Tensor energy;
    };
    Outputs forward(const Tensor& x) const;

    std::vector<NamedParameter> parameters() const;
    std::size_t parameter_count() const;
    void set_requires_grad(bool flag);
    void zero_grad();

    // Deep copy with no shared parameter storage.
    EnergyModel clone() const;

    std::vector<Linear>& trunk() { return trunk_; }
    std::optional<Linear>& classifier_head() { return classifier_; }
    std::optional<Linear>& energy_head() { return energy_head_; }

    void save(io::ByteWriter& out) const;
    static EnergyModel load(io::ByteReader& in);

private:
    void check_input(const Tensor& x) const;

    ModelSpec spec_;
    std::vector<Linear> trunk_;
    std::optional<Linear> classifier_;
    std::optional<Linear> energy_head_;
};

}  // namespace mebm
