#pragma once

#include "mebm/matrix.hpp"
#include "mebm/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mebm {

struct RasterShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t size() const { return height * width * channels; }
    bool operator==(const RasterShape&) const = default;
};

struct Dataset {
    std::string name;
    Matrix samples;                    // N×D, every value inside `range`
    std::vector<std::int32_t> labels;  // empty or N entries in [0, num_classes)
    std::size_t num_classes = 0;
    Range range;
    std::optional<RasterShape> raster;  // set for grid data, D = H·W·C

    std::size_t size() const { return samples.rows; }
    std::size_t dim() const { return samples.cols; }
    bool labeled() const { return !labels.empty(); }

    Dataset subset(std::span<const std::size_t> indices) const;
};

// Standard 2D toy densities scaled into [−1,1]². eight_gaussians and
// two_moons are labeled (mode index / moon index) and stratified: every class
// gets n / C points, the first n mod C classes one extra. `noise` overrides
// the per-kind default (gaussian std 0.05, ring std 0.04, moon std 0.05 in
// canonical moon units).
Dataset synth_2d(std::string_view kind, std::size_t n, std::uint64_t seed,
                 std::optional<double> noise = std::nullopt);

// The eight_gaussians mode centers: a radius-0.7 octagon.
std::vector<std::pair<double, double>> eight_gaussian_centers();
// Canonical two-moons coordinates → dataset coordinates.
std::pair<double, double> moons_to_dataset(double x, double y);

// Grid file: "EBMG", u32 N, H, W, channels, num_classes (little-endian),
// N·H·W·channels u8 pixels (HWC per sample), then N u16 labels when
// num_classes > 0. Pixels map to v/127.5 − 1.
Dataset load_grid(const std::filesystem::path& path);
void save_grid(const std::filesystem::path& path, const Dataset& data);

inline double pixel_to_unit(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }
std::uint8_t unit_to_pixel(double v);

// Per-kind training augmentation, re-clamped to the dataset range.
struct AugmentConfig {
    bool enabled = true;
    double jitter_sigma = 0.01;  // 2D data
    std::size_t max_shift = 2;   // raster: integer translation, edge-replicated
    bool flip = true;            // raster: horizontal flip with probability 1/2
    bool dequantize = true;      // raster: uniform noise within one 8-bit bin
};

Matrix augment(const Matrix& batch, const Dataset& data, Rng& rng, const AugmentConfig& cfg = {});
void flip_horizontal(std::span<double> sample, const RasterShape& shape);

// A mini-batch tagged with whether it went through augmentation.
struct Batch {
    Matrix x;
    std::vector<std::int32_t> labels;
    bool augmented = false;
};

// `count` rows drawn uniformly with replacement.
Batch sample_batch(const Dataset& data, std::size_t count, Rng& rng);

// Random split into (first, second) with round(n·fraction) rows in first.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, Rng& rng);

// "synth:<kind>[:n=<count>][:noise=<sigma>]" or a grid file path.
Dataset load_dataset(std::string_view spec, std::uint64_t seed);

}  // namespace mebm
