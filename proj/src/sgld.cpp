#include "mebm/sgld.hpp"

#include "mebm/error.hpp"
#include "mebm/ops.hpp"

#include <cmath>
#include <sstream>

namespace mebm {

void SgldConfig::validate() const {
    if (steps < 1) throw ConfigError("sgld steps K must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("sgld step_size must be > 0");
    if (!(noise_scale >= 0.0)) throw ConfigError("sgld noise_scale must be >= 0");
    if (clamp_range && !(clamp_range->lo < clamp_range->hi))
        throw ConfigError("sgld clamp range must satisfy lo < hi");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t dim, double reinit_prob)
    : capacity_(capacity), reinit_prob_(reinit_prob), entries_(0, dim) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    if (!(reinit_prob >= 0.0 && reinit_prob <= 1.0))
        throw ConfigError("reinit probability must lie in [0,1]");
    entries_.data.reserve(capacity * dim);
}

void ReplayBuffer::push(const Matrix& samples, Rng& rng) {
    if (samples.cols != dim()) {
        throw ConfigError("buffer push: sample dimension " + std::to_string(samples.cols) +
                          " != buffer dimension " + std::to_string(dim()));
    }
    for (std::size_t r = 0; r < samples.rows; ++r) {
        auto src = samples.row(r);
        if (entries_.rows < capacity_) {
            entries_.data.insert(entries_.data.end(), src.begin(), src.end());
            ++entries_.rows;
        } else {
            auto dst = entries_.row(rng.index(capacity_));
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }
}

void ReplayBuffer::save(io::ByteWriter& out) const {
    out.magic("EBMB");
    out.u64(capacity_);
    out.f64(reinit_prob_);
    out.u64(entries_.rows);
    out.u64(entries_.cols);
    for (double v : entries_.data) out.f64(v);
}

ReplayBuffer ReplayBuffer::load(io::ByteReader& in) {
    in.expect_magic("EBMB");
    const std::size_t capacity = in.u64("buffer capacity");
    const double rho = in.f64("reinit prob");
    const std::size_t rows = in.u64("buffer rows");
    const std::size_t cols = in.u64("buffer dim");
    if (rows > capacity) throw DataError("buffer holds more rows than its capacity");
    ReplayBuffer b(capacity, cols, rho);
    b.entries_.rows = rows;
    b.entries_.data.resize(rows * cols);
    for (double& v : b.entries_.data) v = in.f64("buffer payload");
    return b;
}

InitDraw draw_init(const ReplayBuffer& buffer, const InitDistribution& p0, std::size_t count,
                   Rng& rng, std::optional<Range> init_clamp) {
    const std::size_t d = init_dim(p0);
    if (!buffer.empty() && buffer.dim() != d) throw ConfigError("buffer and p0 dimensions differ");
    InitDraw draw{Matrix(count, d), 0};
    std::vector<std::size_t> fresh;
    for (std::size_t r = 0; r < count; ++r) {
        if (buffer.empty() || rng.bernoulli(buffer.reinit_prob())) {
            fresh.push_back(r);
        } else {
            auto src = buffer.entry(rng.index(buffer.size()));
            std::copy(src.begin(), src.end(), draw.samples.row(r).begin());
        }
    }
    if (!fresh.empty()) {
        const Matrix init = sample_init(p0, fresh.size(), rng, init_clamp);
        for (std::size_t i = 0; i < fresh.size(); ++i) {
            auto src = init.row(i);
            std::copy(src.begin(), src.end(), draw.samples.row(fresh[i]).begin());
        }
    }
    draw.fresh_rows = fresh.size();
    return draw;
}

Matrix sgld_chain(const EnergyModel& model, const Matrix& x0, const SgldConfig& cfg, Rng& rng) {
    EnergyModel frozen = model.clone();
    frozen.set_requires_grad(false);
    return sgld_chain([&frozen](const Tensor& x) { return frozen.energy(x); }, x0, cfg, rng);
}

Matrix sgld_chain(const EnergyFunction& energy, const Matrix& x0, const SgldConfig& cfg, Rng& rng) {
    cfg.validate();
    for (double v : x0.data)
        if (!std::isfinite(v)) throw ConfigError("sgld_chain: non-finite initial state");
    if (x0.rows == 0) return x0;

    Matrix x = x0;
    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        Tensor xt = x.to_tensor(true);
        Tensor e = energy(xt);
        if (e.numel() != x.rows) throw ConfigError("energy function must return one value per row");
        ops::sum(e).backward();
        const auto grad = xt.grad();
        for (std::size_t i = 0; i < e.numel(); ++i) {
            if (!std::isfinite(e[i])) {
                std::ostringstream msg;
                msg << "sgld diverged at step " << t << ": energy " << e[i];
                throw DivergenceError(msg.str(), static_cast<std::int64_t>(t), e[i]);
            }
        }
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            if (!std::isfinite(grad[i])) {
                std::ostringstream msg;
                msg << "sgld diverged at step " << t << ": non-finite energy gradient";
                throw DivergenceError(msg.str(), static_cast<std::int64_t>(t), grad[i]);
            }
            double v = x.data[i] - cfg.step_size * grad[i];
            if (cfg.noise_scale > 0.0) v += cfg.noise_scale * rng.normal();
            if (cfg.clamp_range) v = cfg.clamp_range->clamp(v);
            x.data[i] = v;
        }
    }
    return x;
}

void write_buffer_dump(const std::filesystem::path& path, const Matrix& rows) {
    io::ByteWriter w;
    w.u64(rows.rows);
    w.u64(rows.cols);
    for (double v : rows.data) w.f64(v);
    w.save(path);
}

Matrix read_buffer_dump(const std::filesystem::path& path) {
    auto r = io::ByteReader::load(path);
    Matrix m;
    m.rows = r.u64("count");
    m.cols = r.u64("dim");
    if (m.cols != 0 && m.rows > r.remaining() / 8 / m.cols)
        throw DataError("buffer dump payload shorter than its header");
    m.data.resize(m.rows * m.cols);
    for (double& v : m.data) v = r.f64("buffer dump payload");
    if (!r.at_end()) throw DataError("buffer dump has trailing bytes");
    return m;
}

}  // namespace mebm
