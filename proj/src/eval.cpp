#include "mebm/eval.hpp"

#include "mebm/binary_io.hpp"
#include "mebm/error.hpp"
#include "mebm/init_dist.hpp"
#include "mebm/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mebm {
namespace {

constexpr std::size_t kBlock = 256;

// Σ_ij k(a_i, b_j), optionally skipping i == j (a and b identical).
double kernel_sum(const Matrix& a, const Matrix& b, double gamma, bool skip_diagonal) {
    const auto& k = kernels::active();
    std::vector<double> d2(kBlock * b.rows);
    double total = 0.0;
    for (std::size_t i0 = 0; i0 < a.rows; i0 += kBlock) {
        const std::size_t rows = std::min(kBlock, a.rows - i0);
        k.sq_dists(rows, b.rows, a.cols, a.data.data() + i0 * a.cols, b.data.data(), d2.data());
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < b.rows; ++j) {
                if (skip_diagonal && i0 + i == j) continue;
                total += std::exp(-gamma * d2[i * b.rows + j]);
            }
        }
    }
    return total;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double mmd(const Matrix& a, const Matrix& b, double bandwidth, MmdEstimator estimator) {
    if (a.cols != b.cols) throw ConfigError("mmd: sample dimensions differ");
    if (a.rows < 2 || b.rows < 2) throw ConfigError("mmd: each sample needs at least 2 rows");
    if (!(bandwidth > 0.0)) throw ConfigError("mmd: bandwidth must be positive");
    const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    const auto n = static_cast<double>(a.rows), m = static_cast<double>(b.rows);
    const double ab = kernel_sum(a, b, gamma, false) / (n * m);
    if (estimator == MmdEstimator::Biased) {
        const double aa = kernel_sum(a, a, gamma, false) / (n * n);
        const double bb = kernel_sum(b, b, gamma, false) / (m * m);
        return std::max(aa + bb - 2.0 * ab, 0.0);
    }
    const double aa = kernel_sum(a, a, gamma, true) / (n * (n - 1.0));
    const double bb = kernel_sum(b, b, gamma, true) / (m * (m - 1.0));
    return std::max(aa + bb - 2.0 * ab, 0.0);
}

double median_bandwidth(const Matrix& a, const Matrix& b, std::size_t max_points) {
    const std::size_t na = std::min(a.rows, max_points), nb = std::min(b.rows, max_points);
    Matrix pooled(na + nb, a.cols);
    std::copy(a.data.begin(), a.data.begin() + na * a.cols, pooled.data.begin());
    std::copy(b.data.begin(), b.data.begin() + nb * b.cols, pooled.data.begin() + na * a.cols);
    std::vector<double> d2(pooled.rows * pooled.rows);
    kernels::active().sq_dists(pooled.rows, pooled.rows, pooled.cols, pooled.data.data(),
                               pooled.data.data(), d2.data());
    std::vector<double> dists;
    dists.reserve(pooled.rows * (pooled.rows - 1) / 2);
    for (std::size_t i = 0; i < pooled.rows; ++i)
        for (std::size_t j = i + 1; j < pooled.rows; ++j) dists.push_back(std::sqrt(d2[i * pooled.rows + j]));
    if (dists.empty()) throw ConfigError("median_bandwidth: need at least two points");
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    return *mid > 0.0 ? *mid : 1.0;
}

MomentGap moment_gap(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ConfigError("moment_gap: sample dimensions differ");
    std::vector<double> ma, mb;
    Matrix ca, cb;
    sample_moments(a, ma, ca);
    sample_moments(b, mb, cb);
    MomentGap g;
    for (std::size_t j = 0; j < a.cols; ++j) {
        g.mean_gap.push_back(ma[j] - mb[j]);
        g.max_abs_mean_gap = std::max(g.max_abs_mean_gap, std::abs(ma[j] - mb[j]));
    }
    double f = 0.0;
    for (std::size_t i = 0; i < ca.data.size(); ++i) f += (ca.data[i] - cb.data[i]) * (ca.data[i] - cb.data[i]);
    g.cov_frobenius_gap = std::sqrt(f);
    return g;
}

HistogramTable energy_histogram(const EnergyModel& model, std::span<const HistogramGroup> groups,
                                std::size_t bins) {
    if (bins == 0) throw ConfigError("energy_histogram: bins must be >= 1");
    std::vector<std::vector<double>> neg_energy;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& g : groups) {
        if (g.samples.rows == 0) throw DataError("energy_histogram: group '" + g.name + "' is empty");
        const Tensor e = model.energy(g.samples.to_tensor());
        std::vector<double> v(e.numel());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = -e[i];
            lo = std::min(lo, v[i]);
            hi = std::max(hi, v[i]);
        }
        neg_energy.push_back(std::move(v));
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    HistogramTable t;
    for (std::size_t b = 0; b <= bins; ++b)
        t.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
    const auto bin_of = [&](double v) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        return std::min(b, bins - 1);
    };
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        HistogramTable::Row all{g.name, -1, std::vector<std::size_t>(bins, 0)};
        std::map<std::int32_t, std::vector<std::size_t>> per_class;
        for (std::size_t i = 0; i < neg_energy[gi].size(); ++i) {
            const std::size_t b = bin_of(neg_energy[gi][i]);
            ++all.counts[b];
            if (!g.labels.empty()) {
                auto& c = per_class[g.labels.at(i)];
                c.resize(bins, 0);
                ++c[b];
            }
        }
        t.rows.push_back(std::move(all));
        for (auto& [label, counts] : per_class) t.rows.push_back({g.name, label, std::move(counts)});
    }
    return t;
}

std::string HistogramTable::to_csv() const {
    std::ostringstream os;
    os << "group,class,bin_lo,bin_hi,count\n";
    for (const auto& r : rows)
        for (std::size_t b = 0; b < r.counts.size(); ++b)
            os << r.group << ',' << r.label << ',' << fmt(edges[b]) << ',' << fmt(edges[b + 1])
               << ',' << r.counts[b] << '\n';
    return os.str();
}

std::string HistogramTable::render(std::size_t width) const {
    std::ostringstream os;
    for (const auto& r : rows) {
        os << "== " << r.group;
        if (r.label >= 0) os << " class " << r.label;
        os << " (-E)\n";
        const std::size_t peak = std::max<std::size_t>(1, *std::max_element(r.counts.begin(), r.counts.end()));
        for (std::size_t b = 0; b < r.counts.size(); ++b) {
            char label[48];
            std::snprintf(label, sizeof label, "%10.4f | ", edges[b]);
            os << label << std::string(r.counts[b] * width / peak, '#') << ' ' << r.counts[b] << '\n';
        }
    }
    return os.str();
}

PcaResult pca_project(const Matrix& features, std::size_t k) {
    const std::size_t n = features.rows, h = features.cols;
    if (k == 0 || k > h) throw ConfigError("pca_project: k must lie in [1, H]");
    if (n < k) throw ConfigError("pca_project: need at least k samples");
    PcaResult r;
    Matrix cov;
    sample_moments(features, r.mean, cov);
    double total = 0.0;
    for (std::size_t i = 0; i < h; ++i) total += cov(i, i);
    if (!(total > 0.0)) throw DataError("pca_project: features are degenerate (zero variance)");

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(
        cov.data.data(), static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
    if (solver.info() != Eigen::Success) throw DataError("pca_project: eigensolver failed");
    const auto& evals = solver.eigenvalues();   // ascending
    const auto& evecs = solver.eigenvectors();

    r.components = Matrix(k, h);
    for (std::size_t c_i = 0; c_i < k; ++c_i) {
        const auto col = static_cast<Eigen::Index>(h - 1 - c_i);
        r.explained.push_back(std::max(evals(col), 0.0) / total);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < h; ++j)
            if (std::abs(evecs(static_cast<Eigen::Index>(j), col)) >
                std::abs(evecs(static_cast<Eigen::Index>(arg), col)))
                arg = j;
        const double sign = evecs(static_cast<Eigen::Index>(arg), col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < h; ++j)
            r.components(c_i, j) = sign * evecs(static_cast<Eigen::Index>(j), col);
    }
    r.projected = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c_i = 0; c_i < k; ++c_i) {
            double s = 0.0;
            for (std::size_t j = 0; j < h; ++j) s += (features(i, j) - r.mean[j]) * r.components(c_i, j);
            r.projected(i, c_i) = s;
        }
    return r;
}

EnergyStats energy_stats(const EnergyModel& model, const Matrix& x) {
    if (x.rows == 0) throw DataError("energy_stats: empty sample");
    const Tensor e = model.energy(x.to_tensor());
    std::vector<double> v(e.values().begin(), e.values().end());
    EnergyStats s;
    for (double d : v) s.mean += d;
    s.mean /= static_cast<double>(v.size());
    for (double d : v) s.stddev += (d - s.mean) * (d - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size()));
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    s.median = *mid;
    if (v.size() % 2 == 0) s.median = 0.5 * (s.median + *std::max_element(v.begin(), mid));
    return s;
}

ManifoldReport manifold_analysis(const EnergyModel& model, const Matrix& x_pos, const Matrix& x_neg,
                                 const Matrix& x_init) {
    const std::pair<std::string, const Matrix*> groups[] = {
        {"pos", &x_pos}, {"neg", &x_neg}, {"init", &x_init}};
    Matrix pooled(0, model.feature_dim());
    ManifoldReport rep;
    for (const auto& [name, x] : groups) {
        if (x->rows == 0) throw DataError("manifold_analysis: group '" + name + "' is empty");
        const Tensor f = model.features(x->to_tensor());
        pooled.data.insert(pooled.data.end(), f.values().begin(), f.values().end());
        pooled.rows += x->rows;
        rep.group_of_row.insert(rep.group_of_row.end(), x->rows, name);
    }
    rep.pca = pca_project(pooled, 2);
    rep.explained = rep.pca.explained;
    std::size_t offset = 0;
    for (const auto& [name, x] : groups) {
        double cx = 0.0, cy = 0.0;
        for (std::size_t i = 0; i < x->rows; ++i) {
            cx += rep.pca.projected(offset + i, 0);
            cy += rep.pca.projected(offset + i, 1);
        }
        cx /= static_cast<double>(x->rows);
        cy /= static_cast<double>(x->rows);
        double ss = 0.0;
        for (std::size_t i = 0; i < x->rows; ++i) {
            const double dx = rep.pca.projected(offset + i, 0) - cx;
            const double dy = rep.pca.projected(offset + i, 1) - cy;
            ss += dx * dx + dy * dy;
        }
        rep.centroid[name] = {cx, cy};
        rep.spread[name] = std::sqrt(ss / static_cast<double>(x->rows));
        offset += x->rows;
    }
    const auto dist = [&](const std::string& a, const std::string& b) {
        return std::hypot(rep.centroid[a].first - rep.centroid[b].first,
                          rep.centroid[a].second - rep.centroid[b].second);
    };
    rep.centroid_distance["pos-neg"] = dist("pos", "neg");
    rep.centroid_distance["pos-init"] = dist("pos", "init");
    rep.centroid_distance["neg-init"] = dist("neg", "init");
    return rep;
}

std::string ManifoldReport::to_csv() const {
    std::ostringstream os;
    os << "group,pc1,pc2\n";
    for (std::size_t i = 0; i < group_of_row.size(); ++i)
        os << group_of_row[i] << ',' << fmt(pca.projected(i, 0)) << ',' << fmt(pca.projected(i, 1)) << '\n';
    return os.str();
}

double classifier_accuracy(const EnergyModel& model, const Dataset& data) {
    if (!data.labeled() || data.size() == 0) throw DataError("accuracy needs a labeled, nonempty dataset");
    const Tensor logits = model.logits(data.samples.to_tensor());
    const std::size_t c = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* row = logits.values().data() + i * c;
        const auto best = static_cast<std::int32_t>(std::max_element(row, row + c) - row);
        if (best == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "metric,value\n";
    os << "mmd," << fmt(mmd) << '\n';
    os << "bandwidth," << fmt(bandwidth) << '\n';
    for (std::size_t j = 0; j < mean_gap.size(); ++j) os << "mean_gap_" << j << ',' << fmt(mean_gap[j]) << '\n';
    os << "cov_frobenius_gap," << fmt(cov_frobenius_gap) << '\n';
    for (const auto& [group, s] : energy) {
        os << "energy_mean_" << group << ',' << fmt(s.mean) << '\n';
        os << "energy_std_" << group << ',' << fmt(s.stddev) << '\n';
    }
    if (accuracy) os << "accuracy," << fmt(*accuracy) << '\n';
    return os.str();
}

void render_grid(const Matrix& samples, std::size_t rows, std::size_t cols,
                 const std::filesystem::path& path, std::optional<RasterShape> shape) {
    if (rows * cols < samples.rows) {
        throw ConfigError("render_grid: layout " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " cannot hold " + std::to_string(samples.rows) + " samples");
    }
    if (!shape) {
        if (samples.cols != 2 && samples.rows > 0)
            throw ConfigError("render_grid: non-raster samples must be 2D");
        std::ostringstream os;
        os << "# scatter " << samples.rows << " points: x y\n";
        for (std::size_t i = 0; i < samples.rows; ++i)
            os << fmt(samples(i, 0)) << ' ' << fmt(samples(i, 1)) << '\n';
        io::write_text(path, os.str());
        return;
    }
    if (shape->size() != samples.cols && samples.rows > 0)
        throw ConfigError("render_grid: sample dimension does not match raster shape");
    if (shape->channels != 1 && shape->channels != 3)
        throw ConfigError("render_grid: only 1- or 3-channel rasters can be rendered");
    const std::size_t width = cols * shape->width, height = rows * shape->height;
    std::vector<std::uint8_t> rgb(width * height * 3, 0);
    for (std::size_t s = 0; s < samples.rows; ++s) {
        const std::size_t ty = s / cols, tx = s % cols;
        for (std::size_t r = 0; r < shape->height; ++r)
            for (std::size_t c = 0; c < shape->width; ++c)
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    const std::size_t src_ch = shape->channels == 1 ? 0 : ch;
                    const double v = samples(s, (r * shape->width + c) * shape->channels + src_ch);
                    const std::size_t y = ty * shape->height + r, x = tx * shape->width + c;
                    rgb[(y * width + x) * 3 + ch] = unit_to_pixel(v);
                }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P6\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string magic;
    std::size_t maxval = 0;
    Image img;
    in >> magic >> img.width >> img.height >> maxval;
    if (magic != "P6" || maxval != 255 || !in) throw DataError("not an 8-bit binary PPM: " + path.string());
    in.get();
    img.rgb.resize(img.width * img.height * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!in) throw DataError("truncated PPM: " + path.string());
    return img;
}

}  // namespace mebm
