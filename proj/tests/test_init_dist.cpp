#include "doctest.h"
#include "support.hpp"

#include "mebm/binary_io.hpp"
#include "mebm/error.hpp"
#include "mebm/init_dist.hpp"

#include <cmath>
#include <limits>

using namespace mebm;
using doctest::Approx;

namespace {

double frobenius(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(s);
}

Matrix llt(const GaussianInit& g) {
    Matrix out(g.dim, g.dim);
    for (std::size_t i = 0; i < g.dim; ++i)
        for (std::size_t j = 0; j < g.dim; ++j)
            for (std::size_t k = 0; k < g.dim; ++k)
                out(i, j) += g.chol_factor[i * g.dim + k] * g.chol_factor[j * g.dim + k];
    return out;
}

GaussianInit gaussian_with(std::vector<double> mean, const std::vector<double>& cov) {
    GaussianInit g;
    g.dim = mean.size();
    g.mean = std::move(mean);
    g.eps_reg = 1e-12;
    g.chol_factor = cholesky(cov, g.dim);
    return g;
}

}  // namespace

TEST_CASE("repeated point fits a spherical eps factor") {
    Matrix data(50, 3);
    for (std::size_t r = 0; r < 50; ++r) {
        data(r, 0) = 0.25;
        data(r, 1) = -0.5;
        data(r, 2) = 0.75;
    }
    const GaussianInit g = fit_gaussian(data, 1e-4);
    CHECK(g.mean == std::vector<double>{0.25, -0.5, 0.75});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(g.chol_factor[i * 3 + j] == Approx(i == j ? 1e-2 : 0.0).epsilon(1e-12));
}

TEST_CASE("three point hand covariance divides by N") {
    const Matrix data(3, 2, std::vector<double>{0, 0, 2, 0, 0, 2});
    const GaussianInit g = fit_gaussian(data, 1e-15);
    CHECK(g.mean[0] == Approx(2.0 / 3.0));
    CHECK(g.mean[1] == Approx(2.0 / 3.0));
    const Matrix c = g.covariance();
    CHECK(c(0, 0) == Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(c(1, 1) == Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(c(0, 1) == Approx(-4.0 / 9.0).epsilon(1e-12));
    CHECK(c(1, 0) == Approx(-4.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("factor reconstructs the regularized covariance") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t d = 1 + rng.index(8), n = 2 + rng.index(60);
        Matrix data = test::random_matrix(n, d, rng);
        const GaussianInit g = fit_gaussian(data, 1e-4);
        std::vector<double> mean;
        Matrix cov;
        sample_moments(data, mean, cov);
        for (std::size_t i = 0; i < d; ++i) cov(i, i) += 1e-4;
        CHECK(frobenius(llt(g), cov) < 1e-10);
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(g.chol_factor[i * d + i] > 0.0);
            for (std::size_t j = i + 1; j < d; ++j) CHECK(g.chol_factor[i * d + j] == 0.0);
        }
    }
}

TEST_CASE("affine transform of data moves the fit consistently") {
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + rng.index(4), n = 3 + rng.index(30);
        const Matrix x = test::random_matrix(n, d, rng);
        const double a = rng.uniform(-3, 3), b = rng.uniform(-2, 2);
        Matrix y = x;
        for (double& v : y.data) v = a * v + b;
        std::vector<double> mx, my;
        Matrix cx, cy;
        sample_moments(x, mx, cx);
        sample_moments(y, my, cy);
        for (std::size_t i = 0; i < d; ++i) CHECK(my[i] == Approx(a * mx[i] + b).epsilon(1e-10));
        for (std::size_t i = 0; i < d * d; ++i) CHECK(cy.data[i] == Approx(a * a * cx.data[i]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("fit_gaussian error paths") {
    CHECK_THROWS_AS(fit_gaussian(Matrix(0, 2), 1e-4), DataError);
    Matrix bad(2, 2, std::vector<double>{0, 1, std::numeric_limits<double>::quiet_NaN(), 0});
    CHECK_THROWS_AS(fit_gaussian(bad, 1e-4), DataError);
    CHECK_THROWS_AS(fit_gaussian(Matrix(2, 2), 0.0), ConfigError);
}

TEST_CASE("cholesky reports the failing pivot") {
    const std::vector<double> indefinite{1, 0, 0, 0, -1, 0, 0, 0, 1};
    try {
        cholesky(indefinite, 3);
        FAIL("expected a factorization error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }
}

TEST_CASE("per-class fit") {
    Rng rng(23);
    SUBCASE("single class equals the global fit") {
        const Matrix x = test::random_matrix(40, 2, rng);
        const std::vector<std::int32_t> labels(40, 0);
        const MixtureInit m = fit_per_class(x, labels, 1e-4);
        REQUIRE(m.components.size() == 1);
        CHECK(m.weights == std::vector<double>{1.0});
        CHECK(m.components[0].gaussian == fit_gaussian(x, 1e-4));
    }
    SUBCASE("two separated clusters") {
        Matrix x(2000, 2);
        std::vector<std::int32_t> labels(2000);
        for (std::size_t r = 0; r < 2000; ++r) {
            labels[r] = r % 2 == 0 ? 0 : 1;
            const double c = labels[r] == 0 ? -5.0 : 5.0;
            x(r, 0) = c + rng.normal();
            x(r, 1) = c + rng.normal();
        }
        const MixtureInit m = fit_per_class(x, labels, 1e-4);
        CHECK(m.weights == std::vector<double>{0.5, 0.5});
        for (const auto& comp : m.components) {
            const double c = comp.label == 0 ? -5.0 : 5.0;
            CHECK(std::abs(comp.gaussian.mean[0] - c) < 0.5);
            CHECK(std::abs(comp.gaussian.mean[1] - c) < 0.5);
        }
        double total = 0.0;
        for (double w : m.weights) total += w;
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    SUBCASE("empty class is an error") {
        const Matrix x = test::random_matrix(4, 2, rng);
        const std::vector<std::int32_t> labels{0, 2, 0, 2};
        CHECK_THROWS_AS(fit_per_class(x, labels, 1e-4), DataError);
    }
}

TEST_CASE("degenerate gaussian samples equal the mean") {
    Matrix data(10, 2);
    for (std::size_t r = 0; r < 10; ++r) data(r, 0) = 0.3, data(r, 1) = -0.1;
    const GaussianInit g = fit_gaussian(data, 1e-20);
    Rng rng(24);
    const Matrix s = sample_init(g, 100, rng);
    for (std::size_t r = 0; r < 100; ++r) {
        CHECK(std::abs(s(r, 0) - 0.3) < 1e-9);
        CHECK(std::abs(s(r, 1) + 0.1) < 1e-9);
    }
}

TEST_CASE("standard normal sampling moments") {
    const GaussianInit g = gaussian_with({0.0}, {1.0});
    Rng rng(25);
    const Matrix s = sample_init(g, 100000, rng);
    std::vector<double> m;
    Matrix c;
    sample_moments(s, m, c);
    CHECK(std::abs(m[0]) < 0.02);
    CHECK(c(0, 0) >= 0.97);
    CHECK(c(0, 0) <= 1.03);
}

TEST_CASE("correlated 2D sampling covariance") {
    const GaussianInit g = gaussian_with({0.0, 0.0}, {2, 1, 1, 2});
    Rng rng(26);
    const Matrix s = sample_init(g, 100000, rng);
    std::vector<double> m;
    Matrix c;
    sample_moments(s, m, c);
    CHECK(frobenius(c, Matrix(2, 2, std::vector<double>{2, 1, 1, 2})) < 0.05);
}

TEST_CASE("clamp keeps samples in range") {
    const GaussianInit g = gaussian_with({0.9, -0.9}, {1, 0, 0, 1});
    Rng rng(27);
    const Matrix s = sample_init(g, 1000, rng, Range{-1, 1});
    for (double v : s.data) CHECK((v >= -1.0 && v <= 1.0));
}

TEST_CASE("mixture draws pick components by weight") {
    MixtureInit m;
    m.dim = 1;
    m.components = {{0, gaussian_with({-10.0}, {1e-6})}, {1, gaussian_with({10.0}, {1e-6})}};
    m.weights = {0.25, 0.75};
    Rng rng(28);
    const Matrix s = sample_init(m, 40000, rng);
    std::size_t right = 0;
    for (double v : s.data) right += v > 0 ? 1 : 0;
    const double p = static_cast<double>(right) / 40000.0;
    CHECK(std::abs(p - 0.75) < 5.0 * std::sqrt(0.75 * 0.25 / 40000.0));
}

TEST_CASE("uniform init stays inside its range") {
    Rng rng(29);
    const Matrix s = sample_init(UniformInit{Range{-0.5, 0.25}, 3}, 5000, rng);
    for (double v : s.data) CHECK((v >= -0.5 && v < 0.25));
}

TEST_CASE("init file round trip is bitwise") {
    Rng rng(30);
    const Matrix x = test::random_matrix(200, 3, rng);
    std::vector<std::int32_t> labels(200);
    for (std::size_t i = 0; i < 200; ++i) labels[i] = static_cast<std::int32_t>(i % 3);
    const std::vector<InitDistribution> dists{fit_gaussian(x, 1e-4), fit_per_class(x, labels, 1e-3),
                                              UniformInit{Range{-1, 1}, 3}};
    test::TempDir dir("init");
    for (const auto& d : dists) {
        save_init(dir / "p0.bin", d);
        const InitDistribution back = load_init(dir / "p0.bin");
        CHECK(back == d);
        CHECK(init_kind(back) == init_kind(d));
    }
    auto bytes = io::read_file(dir / "p0.bin");
    bytes.pop_back();
    io::write_file(dir / "cut.bin", bytes);
    CHECK_THROWS_AS(load_init(dir / "cut.bin"), DataError);
}

TEST_CASE("one factor regardless of class count") {
    Rng rng(31);
    const Matrix x = test::random_matrix(100, 4, rng);
    std::vector<std::int32_t> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<std::int32_t>(i % 5);
    const GaussianInit g = fit_gaussian(x, 1e-4);
    const MixtureInit m = fit_per_class(x, labels, 1e-4);
    CHECK(g.chol_factor.size() == 16);
    CHECK(m.components.size() == 5);
}
