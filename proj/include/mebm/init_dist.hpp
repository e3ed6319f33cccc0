#pragma once

// Initial distributions p0(x) for SGLD chains.
//
// GaussianInit is the informative initialization: one multivariate normal
// fitted to the whole training set, stored as its mean and the lower Cholesky
// factor of (Σ + eps_reg·I). MixtureInit fits one such Gaussian per class and
// is kept for comparison runs. UniformInit is the classic noise start.

#include "mebm/binary_io.hpp"
#include "mebm/matrix.hpp"
#include "mebm/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace mebm {

struct GaussianInit {
    std::vector<double> mean;        // D
    std::vector<double> chol_factor;  // D×D row-major, lower triangular
    double eps_reg = 1e-4;
    std::size_t dim = 0;

    // Σ + eps_reg·I reconstructed from the factor.
    Matrix covariance() const;
    bool operator==(const GaussianInit&) const = default;
};

struct MixtureComponent {
    std::int32_t label = 0;
    GaussianInit gaussian;
    bool operator==(const MixtureComponent&) const = default;
};

struct MixtureInit {
    std::vector<MixtureComponent> components;
    std::vector<double> weights;  // class frequencies, sum to 1
    std::size_t dim = 0;
    bool operator==(const MixtureInit&) const = default;
};

struct UniformInit {
    Range range;
    std::size_t dim = 0;
    bool operator==(const UniformInit&) const = default;
};

using InitDistribution = std::variant<GaussianInit, MixtureInit, UniformInit>;

std::size_t init_dim(const InitDistribution& dist);
std::string_view init_kind(const InitDistribution& dist);

// Lower Cholesky factor of a symmetric positive-definite matrix (D×D row-major).
// Throws DataError naming the first non-positive pivot.
std::vector<double> cholesky(std::span<const double> spd, std::size_t dim);

// Mean and covariance (normalized by N) of the rows of `data`.
void sample_moments(const Matrix& data, std::vector<double>& mean, Matrix& cov);

GaussianInit fit_gaussian(const Matrix& data, double eps_reg);
MixtureInit fit_per_class(const Matrix& data, std::span<const std::int32_t> labels, double eps_reg);

// `count` i.i.d. draws of μ + L·z. A mixture first picks a component by weight.
// When `clamp` is set every coordinate is clipped to it.
Matrix sample_init(const InitDistribution& dist, std::size_t count, Rng& rng,
                   std::optional<Range> clamp = std::nullopt);

void save_init(io::ByteWriter& out, const InitDistribution& dist);
InitDistribution load_init(io::ByteReader& in);
void save_init(const std::filesystem::path& path, const InitDistribution& dist);
InitDistribution load_init(const std::filesystem::path& path);

}  // namespace mebm
