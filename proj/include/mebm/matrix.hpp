#pragma once

#include "mebm/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mebm {

// Row-major sample matrix (N samples × D features) for data that does not
// need gradients: datasets, buffer contents, chain states.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    bool empty() const { return rows == 0; }

    Tensor to_tensor(bool requires_grad = false) const {
        return Tensor::from({rows, cols}, data, requires_grad);
    }
    static Matrix from_tensor(const Tensor& t) {
        return {t.dim(0), t.rank() > 1 ? t.dim(1) : 1,
                std::vector<double>(t.values().begin(), t.values().end())};
    }

    bool operator==(const Matrix&) const = default;
};

struct Range {
    double lo = -1.0;
    double hi = 1.0;

    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
    bool operator==(const Range&) const = default;
};

}  // namespace mebm
