#include "mebm/init_dist.hpp"

#include "mebm/error.hpp"
#include "mebm/kernels.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace mebm {
namespace {

constexpr std::string_view kInitMagic = "EBMI";

enum class InitKind : std::uint32_t { Gaussian = 0, Mixture = 1, Uniform = 2 };

void draw_gaussian(const GaussianInit& g, Rng& rng, std::span<double> out, std::vector<double>& z) {
    const std::size_t d = g.dim;
    for (std::size_t i = 0; i < d; ++i) z[i] = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
        const double* lrow = g.chol_factor.data() + i * d;
        double s = g.mean[i];
        for (std::size_t j = 0; j <= i; ++j) s += lrow[j] * z[j];
        out[i] = s;
    }
}

void write_gaussian_body(io::ByteWriter& out, const GaussianInit& g) {
    for (double m : g.mean) out.f64(m);
    for (std::size_t i = 0; i < g.dim; ++i)
        for (std::size_t j = 0; j <= i; ++j) out.f64(g.chol_factor[i * g.dim + j]);
}

GaussianInit read_gaussian_body(io::ByteReader& in, std::size_t dim, double eps_reg) {
    GaussianInit g;
    g.dim = dim;
    g.eps_reg = eps_reg;
    g.mean.resize(dim);
    for (double& m : g.mean) m = in.f64("mean");
    g.chol_factor.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j <= i; ++j) g.chol_factor[i * dim + j] = in.f64("factor");
    return g;
}

}  // namespace

Matrix GaussianInit::covariance() const {
    Matrix c(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= std::min(i, j); ++k)
                s += chol_factor[i * dim + k] * chol_factor[j * dim + k];
            c(i, j) = s;
        }
    return c;
}

std::size_t init_dim(const InitDistribution& dist) {
    return std::visit([](const auto& d) { return d.dim; }, dist);
}

std::string_view init_kind(const InitDistribution& dist) {
    switch (dist.index()) {
        case 0: return "gaussian";
        case 1: return "mixture";
        default: return "uniform";
    }
}

std::vector<double> cholesky(std::span<const double> spd, std::size_t dim) {
    if (spd.size() != dim * dim) throw ConfigError("cholesky: matrix is not D x D");
    std::vector<double> l(dim * dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
        double diag = spd[j * dim + j];
        for (std::size_t k = 0; k < j; ++k) diag -= l[j * dim + k] * l[j * dim + k];
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            std::ostringstream msg;
            msg << "cholesky: non-positive pivot " << diag << " at index " << j;
            throw DataError(msg.str());
        }
        const double ljj = std::sqrt(diag);
        l[j * dim + j] = ljj;
        for (std::size_t i = j + 1; i < dim; ++i) {
            double s = spd[i * dim + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * dim + k] * l[j * dim + k];
            l[i * dim + j] = s / ljj;
        }
    }
    return l;
}

void sample_moments(const Matrix& data, std::vector<double>& mean, Matrix& cov) {
    const std::size_t n = data.rows, d = data.cols;
    if (n == 0) throw DataError("cannot fit moments of an empty dataset");
    mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += data(i, j);
    for (double& m : mean) m /= static_cast<double>(n);

    Matrix centered(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) = data(i, j) - mean[j];
    cov = Matrix(d, d);
    kernels::active().gemm_tn(d, d, n, centered.data.data(), centered.data.data(), cov.data.data(),
                              false);
    for (double& c : cov.data) c /= static_cast<double>(n);
    // Symmetrize against rounding differences between (i,j) and (j,i).
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) cov(j, i) = cov(i, j);
}

GaussianInit fit_gaussian(const Matrix& data, double eps_reg) {
    if (!(eps_reg > 0.0)) throw ConfigError("eps_reg must be positive");
    for (double v : data.data)
        if (!std::isfinite(v)) throw DataError("fit_gaussian: data contains non-finite values");
    GaussianInit g;
    g.dim = data.cols;
    g.eps_reg = eps_reg;
    Matrix cov;
    sample_moments(data, g.mean, cov);
    for (std::size_t i = 0; i < g.dim; ++i) cov(i, i) += eps_reg;
    g.chol_factor = cholesky(cov.data, g.dim);
    return g;
}

MixtureInit fit_per_class(const Matrix& data, std::span<const std::int32_t> labels,
                          double eps_reg) {
    if (labels.size() != data.rows) throw DataError("fit_per_class: label count != sample count");
    if (data.rows == 0) throw DataError("fit_per_class: empty dataset");
    std::map<std::int32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    // Classes are contiguous 0..C-1; a gap is an empty class.
    const std::int32_t max_label = by_class.rbegin()->first;
    if (by_class.begin()->first < 0) throw DataError("fit_per_class: negative label");
    for (std::int32_t c = 0; c <= max_label; ++c) {
        if (!by_class.count(c)) throw DataError("fit_per_class: class " + std::to_string(c) + " is empty");
    }

    MixtureInit mix;
    mix.dim = data.cols;
    for (const auto& [label, idx] : by_class) {
        Matrix subset(idx.size(), data.cols);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            auto src = data.row(idx[r]);
            std::copy(src.begin(), src.end(), subset.row(r).begin());
        }
        mix.components.push_back({label, fit_gaussian(subset, eps_reg)});
        mix.weights.push_back(static_cast<double>(idx.size()) / static_cast<double>(data.rows));
    }
    return mix;
}

Matrix sample_init(const InitDistribution& dist, std::size_t count, Rng& rng,
                   std::optional<Range> clamp) {
    const std::size_t d = init_dim(dist);
    Matrix out(count, d);
    std::vector<double> z(d);
    for (std::size_t r = 0; r < count; ++r) {
        auto row = out.row(r);
        if (const auto* g = std::get_if<GaussianInit>(&dist)) {
            draw_gaussian(*g, rng, row, z);
        } else if (const auto* m = std::get_if<MixtureInit>(&dist)) {
            double u = rng.uniform();
            std::size_t pick = m->components.size() - 1;
            for (std::size_t c = 0; c < m->weights.size(); ++c) {
                if (u < m->weights[c]) {
                    pick = c;
                    break;
                }
                u -= m->weights[c];
            }
            draw_gaussian(m->components[pick].gaussian, rng, row, z);
        } else {
            const auto& u = std::get<UniformInit>(dist);
            for (double& v : row) v = rng.uniform(u.range.lo, u.range.hi);
        }
        if (clamp) {
            for (double& v : row) v = clamp->clamp(v);
        }
    }
    return out;
}

void save_init(io::ByteWriter& out, const InitDistribution& dist) {
    out.magic(kInitMagic);
    out.u64(init_dim(dist));
    if (const auto* g = std::get_if<GaussianInit>(&dist)) {
        out.f64(g->eps_reg);
        out.u32(static_cast<std::uint32_t>(InitKind::Gaussian));
        write_gaussian_body(out, *g);
    } else if (const auto* m = std::get_if<MixtureInit>(&dist)) {
        out.f64(m->components.empty() ? 0.0 : m->components.front().gaussian.eps_reg);
        out.u32(static_cast<std::uint32_t>(InitKind::Mixture));
        out.u64(m->components.size());
        for (std::size_t c = 0; c < m->components.size(); ++c) {
            out.u32(static_cast<std::uint32_t>(m->components[c].label));
            out.f64(m->weights[c]);
            write_gaussian_body(out, m->components[c].gaussian);
        }
    } else {
        const auto& u = std::get<UniformInit>(dist);
        out.f64(0.0);
        out.u32(static_cast<std::uint32_t>(InitKind::Uniform));
        out.f64(u.range.lo);
        out.f64(u.range.hi);
    }
}

InitDistribution load_init(io::ByteReader& in) {
    in.expect_magic(kInitMagic);
    const std::size_t dim = in.u64("dimension");
    const double eps_reg = in.f64("eps_reg");
    const std::uint32_t kind = in.u32("kind");
    switch (static_cast<InitKind>(kind)) {
        case InitKind::Gaussian: return read_gaussian_body(in, dim, eps_reg);
        case InitKind::Mixture: {
            MixtureInit m;
            m.dim = dim;
            const std::size_t n = in.u64("component count");
            for (std::size_t c = 0; c < n; ++c) {
                const auto label = static_cast<std::int32_t>(in.u32("label"));
                m.weights.push_back(in.f64("weight"));
                m.components.push_back({label, read_gaussian_body(in, dim, eps_reg)});
            }
            return m;
        }
        case InitKind::Uniform: {
            UniformInit u;
            u.dim = dim;
            u.range.lo = in.f64("lo");
            u.range.hi = in.f64("hi");
            return u;
        }
    }
    throw DataError("unknown init kind " + std::to_string(kind));
}

void save_init(const std::filesystem::path& path, const InitDistribution& dist) {
    io::ByteWriter w;
    save_init(w, dist);
    w.save(path);
}

InitDistribution load_init(const std::filesystem::path& path) {
    auto r = io::ByteReader::load(path);
    return load_init(r);
}

}  // namespace mebm
