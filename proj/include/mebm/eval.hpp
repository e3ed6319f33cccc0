#pragma once

// Desk-scale diagnostics: kernel two-sample statistics, moment gaps, energy
// histograms, PCA projections of penultimate features, and sample renders.

#include "mebm/datasets.hpp"
#include "mebm/energy_model.hpp"
#include "mebm/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mebm {

enum class MmdEstimator {
    Unbiased,  // U-statistic, reported as max(·, 0)
    Biased,    // V-statistic, always ≥ 0
};

// Squared MMD with the Gaussian kernel exp(−‖u−v‖² / (2·bandwidth²)).
double mmd(const Matrix& a, const Matrix& b, double bandwidth,
           MmdEstimator estimator = MmdEstimator::Unbiased);

// Median pairwise distance of the pooled sample (first `max_points` rows of each).
double median_bandwidth(const Matrix& a, const Matrix& b, std::size_t max_points = 1000);

struct MomentGap {
    std::vector<double> mean_gap;  // mean(a) − mean(b)
    double max_abs_mean_gap = 0.0;
    double cov_frobenius_gap = 0.0;  // ‖cov(a) − cov(b)‖_F
};

MomentGap moment_gap(const Matrix& a, const Matrix& b);

struct HistogramGroup {
    std::string name;
    Matrix samples;
    std::vector<std::int32_t> labels;  // optional, enables per-class rows
};

// Histograms of −E per group (class −1 = whole group) and per class, on bin
// edges shared by every row.
struct HistogramTable {
    struct Row {
        std::string group;
        std::int32_t label = -1;
        std::vector<std::size_t> counts;
    };
    std::vector<double> edges;  // bins + 1 ascending values
    std::vector<Row> rows;

    std::string to_csv() const;
    // Text bar chart, one block per row.
    std::string render(std::size_t width = 50) const;
};

HistogramTable energy_histogram(const EnergyModel& model, std::span<const HistogramGroup> groups,
                                std::size_t bins);

struct PcaResult {
    Matrix projected;                  // N×k
    std::vector<double> explained;     // fraction of total variance per component
    Matrix components;                 // k×H, unit rows
    std::vector<double> mean;          // H
};

// Projects centered features onto the top-k principal directions. Each
// direction's largest-magnitude coordinate is made positive.
PcaResult pca_project(const Matrix& features, std::size_t k = 2);

struct EnergyStats {
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;
};

EnergyStats energy_stats(const EnergyModel& model, const Matrix& x);

// Centroids and spreads of the x⁺ / x⁻ / x⁰ feature clouds in a shared PCA plane.
struct ManifoldReport {
    std::map<std::string, std::pair<double, double>> centroid;
    std::map<std::string, double> spread;  // RMS distance to own centroid
    std::map<std::string, double> centroid_distance;  // "pos-neg", "pos-init", "neg-init"
    std::vector<double> explained;
    PcaResult pca;
    std::vector<std::string> group_of_row;

    std::string to_csv() const;
};

ManifoldReport manifold_analysis(const EnergyModel& model, const Matrix& x_pos, const Matrix& x_neg,
                                 const Matrix& x_init);

double classifier_accuracy(const EnergyModel& model, const Dataset& data);

struct EvalReport {
    double mmd = 0.0;
    double bandwidth = 0.0;
    std::vector<double> mean_gap;
    double cov_frobenius_gap = 0.0;
    std::map<std::string, EnergyStats> energy;  // "x+", "x-", "x0", "uniform"
    std::optional<double> accuracy;

    std::string to_csv() const;
};

// Render: raster rows become an 8-bit binary PPM tiled rows×cols; 2D rows
// become a plain-text "x y" scatter file.
void render_grid(const Matrix& samples, std::size_t rows, std::size_t cols,
                 const std::filesystem::path& path,
                 std::optional<RasterShape> shape = std::nullopt);

struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;
};

Image read_ppm(const std::filesystem::path& path);

}  // namespace mebm
