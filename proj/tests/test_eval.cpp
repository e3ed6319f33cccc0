#include "doctest.h"
#include "support.hpp"

#include "mebm/error.hpp"
#include "mebm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mebm;
using doctest::Approx;

namespace {

EnergyModel constant_model(double beta) {
    ModelSpec s;
    s.input_dim = 2;
    s.hidden = {4};
    EnergyModel m(s);
    for (auto& p : m.parameters())
        for (double& v : p.tensor.mutable_values()) v = 0.0;
    m.energy_head()->bias.mutable_values()[0] = beta;
    return m;
}

Matrix shuffled(const Matrix& m, Rng& rng) {
    std::vector<std::size_t> order(m.rows);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    Matrix out(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) std::copy(m.row(order[r]).begin(), m.row(order[r]).end(), out.row(r).begin());
    return out;
}

double pair_dist(const Matrix& m, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += (m(i, c) - m(j, c)) * (m(i, c) - m(j, c));
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("mmd on identical sets") {
    Rng rng(1);
    const Matrix a = test::random_matrix(200, 2, rng);
    CHECK(mmd(a, a, 1.0, MmdEstimator::Biased) == Approx(0.0).scale(1.0).epsilon(1e-12));
    const double u = mmd(a, a, 1.0, MmdEstimator::Unbiased);
    CHECK(u >= 0.0);
    CHECK(u < 1e-2);
}

TEST_CASE("mmd separates far distributions") {
    Rng rng(2);
    const Matrix a = test::random_matrix(1000, 2, rng);
    Matrix b = test::random_matrix(1000, 2, rng);
    for (double& v : b.data) v += 10.0;
    CHECK(mmd(a, b, median_bandwidth(a, b)) > 0.5);
}

TEST_CASE("mmd symmetry and permutation invariance") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 1 + rng.index(4);
        const Matrix a = test::random_matrix(20 + rng.index(40), d, rng);
        const Matrix b = test::random_matrix(20 + rng.index(40), d, rng, 1.5);
        const double bw = rng.uniform(0.3, 2.0);
        for (auto est : {MmdEstimator::Biased, MmdEstimator::Unbiased}) {
            const double base = mmd(a, b, bw, est);
            CHECK(mmd(b, a, bw, est) == Approx(base).epsilon(1e-12));
            CHECK(mmd(shuffled(a, rng), shuffled(b, rng), bw, est) == Approx(base).epsilon(1e-10).scale(1e-3));
            CHECK(base >= 0.0);
        }
    }
    CHECK_THROWS_AS(mmd(Matrix(1, 2), Matrix(5, 2), 1.0), ConfigError);
    CHECK_THROWS_AS(mmd(Matrix(5, 2), Matrix(5, 2), 0.0), ConfigError);
}

TEST_CASE("mmd matches a direct double loop") {
    Rng rng(4);
    const Matrix a = test::random_matrix(13, 3, rng), b = test::random_matrix(9, 3, rng);
    const double bw = 0.9;
    auto k = [&](const Matrix& x, std::size_t i, const Matrix& y, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s += (x(i, c) - y(j, c)) * (x(i, c) - y(j, c));
        return std::exp(-s / (2 * bw * bw));
    };
    double xx = 0, yy = 0, xy = 0;
    for (std::size_t i = 0; i < 13; ++i)
        for (std::size_t j = 0; j < 13; ++j)
            if (i != j) xx += k(a, i, a, j);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j)
            if (i != j) yy += k(b, i, b, j);
    for (std::size_t i = 0; i < 13; ++i)
        for (std::size_t j = 0; j < 9; ++j) xy += k(a, i, b, j);
    const double unbiased = xx / (13 * 12) + yy / (9 * 8) - 2 * xy / (13 * 9);
    CHECK(mmd(a, b, bw, MmdEstimator::Unbiased) == Approx(std::max(unbiased, 0.0)).epsilon(1e-12));
    const double biased = (xx + 13) / (13 * 13) + (yy + 9) / (9 * 9) - 2 * xy / (13 * 9);
    CHECK(mmd(a, b, bw, MmdEstimator::Biased) == Approx(biased).epsilon(1e-12));
}

TEST_CASE("constant energy model gives a single spike") {
    const EnergyModel m = constant_model(1.25);
    Rng rng(5);
    std::vector<HistogramGroup> groups{{"x+", test::random_matrix(50, 2, rng), {}},
                                       {"uniform", test::random_matrix(30, 2, rng), {}}};
    const HistogramTable t = energy_histogram(m, groups, 10);
    REQUIRE(t.rows.size() == 2);
    for (const auto& row : t.rows) {
        const auto nonzero = std::count_if(row.counts.begin(), row.counts.end(), [](std::size_t c) { return c > 0; });
        CHECK(nonzero == 1);
        const auto bin = static_cast<std::size_t>(
            std::find_if(row.counts.begin(), row.counts.end(), [](std::size_t c) { return c > 0; }) - row.counts.begin());
        CHECK(t.edges[bin] <= -1.25);
        CHECK(t.edges[bin + 1] >= -1.25);
    }
    CHECK(std::accumulate(t.rows[0].counts.begin(), t.rows[0].counts.end(), std::size_t{0}) == 50);
    CHECK(std::accumulate(t.rows[1].counts.begin(), t.rows[1].counts.end(), std::size_t{0}) == 30);
    CHECK(t.to_csv().find("x+") != std::string::npos);
    CHECK_FALSE(t.render().empty());
    std::vector<HistogramGroup> bad{{"empty", Matrix(0, 2), {}}};
    CHECK_THROWS_AS(energy_histogram(m, bad, 5), DataError);
}

TEST_CASE("per-class rows partition the group") {
    ModelSpec s;
    s.input_dim = 2;
    s.hidden = {5};
    const EnergyModel m(s);
    Rng rng(6);
    std::vector<std::int32_t> labels(40);
    for (std::size_t i = 0; i < 40; ++i) labels[i] = static_cast<std::int32_t>(i % 3);
    std::vector<HistogramGroup> groups{{"x+", test::random_matrix(40, 2, rng), labels}};
    const HistogramTable t = energy_histogram(m, groups, 7);
    std::size_t all = 0, per_class = 0;
    for (const auto& row : t.rows) {
        const auto n = std::accumulate(row.counts.begin(), row.counts.end(), std::size_t{0});
        (row.label < 0 ? all : per_class) += n;
    }
    CHECK(all == 40);
    CHECK(per_class == 40);
}

TEST_CASE("histograms of a shifted-energy group are translated") {
    // Two groups evaluated by models differing only in head bias c: same
    // counts once edges are shifted by c.
    ModelSpec s;
    s.input_dim = 2;
    s.hidden = {6};
    const EnergyModel a(s);
    EnergyModel b = a.clone();
    b.energy_head()->bias.mutable_values()[0] -= 0.75;
    Rng rng(7);
    std::vector<HistogramGroup> g{{"x", test::random_matrix(100, 2, rng), {}}};
    const HistogramTable ta = energy_histogram(a, g, 12), tb = energy_histogram(b, g, 12);
    CHECK(ta.rows[0].counts == tb.rows[0].counts);
    for (std::size_t i = 0; i < ta.edges.size(); ++i) CHECK(tb.edges[i] == Approx(ta.edges[i] + 0.75).epsilon(1e-12));
}

TEST_CASE("pca on planar data explains everything in two components") {
    Rng rng(8);
    Matrix f(500, 6);
    for (std::size_t r = 0; r < 500; ++r) {
        f(r, 1) = 3.0 * rng.normal();
        f(r, 4) = rng.normal();
    }
    const PcaResult p = pca_project(f, 2);
    CHECK(p.explained[0] + p.explained[1] == Approx(1.0).epsilon(1e-12));
    CHECK(p.explained[0] > p.explained[1]);
}

TEST_CASE("pca on isotropic features spreads variance evenly") {
    Rng rng(9);
    const Matrix f = test::random_matrix(10000, 10, rng);
    const PcaResult p = pca_project(f, 2);
    for (double e : p.explained) {
        CHECK(e >= 0.08);
        CHECK(e <= 0.12);
    }
}

TEST_CASE("pca is rotation invariant up to an isometry") {
    Rng rng(10);
    const std::size_t h = 5, n = 60;
    Matrix f = test::random_matrix(n, h, rng);
    for (std::size_t r = 0; r < n; ++r) f(r, 0) *= 4.0, f(r, 1) *= 2.0;
    // Random orthogonal matrix via Gram-Schmidt.
    Matrix q = test::random_matrix(h, h, rng);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < h; ++c) d += q(i, c) * q(j, c);
            for (std::size_t c = 0; c < h; ++c) q(i, c) -= d * q(j, c);
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < h; ++c) norm += q(i, c) * q(i, c);
        for (std::size_t c = 0; c < h; ++c) q(i, c) /= std::sqrt(norm);
    }
    Matrix g(n, h);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < h; ++c)
            for (std::size_t k = 0; k < h; ++k) g(r, c) += f(r, k) * q(c, k);
    const PcaResult a = pca_project(f, 2), b = pca_project(g, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            CHECK(std::abs(pair_dist(a.projected, i, j) - pair_dist(b.projected, i, j)) < 1e-9);
}

TEST_CASE("pca residual is orthogonal to the retained subspace") {
    Rng rng(11);
    const Matrix f = test::random_matrix(80, 4, rng);
    const PcaResult p = pca_project(f, 2);
    for (std::size_t r = 0; r < 80; ++r) {
        std::vector<double> resid(4);
        for (std::size_t c = 0; c < 4; ++c) {
            resid[c] = f(r, c) - p.mean[c];
            for (std::size_t k = 0; k < 2; ++k) resid[c] -= p.projected(r, k) * p.components(k, c);
        }
        for (std::size_t k = 0; k < 2; ++k) {
            double dot = 0.0;
            for (std::size_t c = 0; c < 4; ++c) dot += resid[c] * p.components(k, c);
            CHECK(std::abs(dot) < 1e-10);
        }
    }
}

TEST_CASE("pca sign convention and errors") {
    Rng rng(12);
    const PcaResult p = pca_project(test::random_matrix(50, 3, rng), 2);
    for (std::size_t k = 0; k < 2; ++k) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c)
            if (std::abs(p.components(k, c)) > std::abs(p.components(k, best))) best = c;
        CHECK(p.components(k, best) > 0.0);
    }
    CHECK_THROWS_AS(pca_project(Matrix(10, 3, 0.5), 2), DataError);
    CHECK_THROWS_AS(pca_project(Matrix(1, 3), 2), ConfigError);
}

TEST_CASE("render grid tiles and scatter files") {
    test::TempDir dir("render");
    const RasterShape shape{2, 3, 1};
    Matrix s(2, 6);
    std::fill(s.row(0).begin(), s.row(0).end(), -1.0);
    std::fill(s.row(1).begin(), s.row(1).end(), 1.0);
    render_grid(s, 1, 2, dir / "g.ppm", shape);
    const Image img = read_ppm(dir / "g.ppm");
    CHECK(img.width == 6);
    CHECK(img.height == 2);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 6; ++x)
            for (std::size_t c = 0; c < 3; ++c) CHECK(img.rgb[(y * 6 + x) * 3 + c] == (x < 3 ? 0 : 255));

    Rng rng(13);
    Matrix tile(1, 6);
    for (double& v : tile.data) v = rng.uniform(-1, 1);
    render_grid(tile, 1, 1, dir / "t.ppm", shape);
    const Image back = read_ppm(dir / "t.ppm");
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(pixel_to_unit(back.rgb[i * 3]) - tile.data[i]) <= 1.0 / 127.5);

    CHECK_THROWS_AS(render_grid(s, 1, 1, dir / "x.ppm", shape), ConfigError);
    const Matrix pts(3, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    render_grid(pts, 2, 2, dir / "p.txt");
    CHECK(io::read_file(dir / "p.txt").size() > 0);
}

TEST_CASE("moment gap and energy stats") {
    Rng rng(14);
    const Matrix a = test::random_matrix(1000, 2, rng);
    Matrix b = a;
    for (std::size_t r = 0; r < b.rows; ++r) b(r, 0) += 0.5;
    const MomentGap g = moment_gap(b, a);
    CHECK(g.mean_gap[0] == Approx(0.5));
    CHECK(g.max_abs_mean_gap == Approx(0.5));
    CHECK(g.cov_frobenius_gap < 1e-12);
    const EnergyStats s = energy_stats(constant_model(2.0), a);
    CHECK(s.mean == Approx(2.0));
    CHECK(s.median == Approx(2.0));
    CHECK(s.stddev == Approx(0.0).scale(1.0));
}
