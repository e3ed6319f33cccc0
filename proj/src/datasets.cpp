#include "mebm/datasets.hpp"

#include "mebm/binary_io.hpp"
#include "mebm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mebm {
namespace {

constexpr std::string_view kGridMagic = "EBMG";

std::vector<std::size_t> stratified_counts(std::size_t n, std::size_t classes) {
    std::vector<std::size_t> counts(classes, n / classes);
    for (std::size_t c = 0; c < n % classes; ++c) ++counts[c];
    return counts;
}

void shuffle_rows(Dataset& d, Rng& rng) {
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    d = d.subset(order);
}

void clamp_all(Dataset& d) {
    for (double& v : d.samples.data) v = d.range.clamp(v);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.name = name;
    out.num_classes = num_classes;
    out.range = range;
    out.raster = raster;
    out.samples = Matrix(indices.size(), dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        auto src = samples.row(indices[r]);
        std::copy(src.begin(), src.end(), out.samples.row(r).begin());
        if (labeled()) out.labels.push_back(labels[indices[r]]);
    }
    return out;
}

std::vector<std::pair<double, double>> eight_gaussian_centers() {
    std::vector<std::pair<double, double>> c;
    for (int k = 0; k < 8; ++k) {
        const double a = k * std::numbers::pi / 4.0;
        c.emplace_back(0.7 * std::cos(a), 0.7 * std::sin(a));
    }
    return c;
}

std::pair<double, double> moons_to_dataset(double x, double y) {
    return {(x - 0.5) / 1.6, (y - 0.25) / 1.6};
}

Dataset synth_2d(std::string_view kind, std::size_t n, std::uint64_t seed,
                 std::optional<double> noise) {
    if (n == 0) throw ConfigError("synth_2d: n must be >= 1");
    Rng rng = Rng::derive(seed, "synth");
    Dataset d;
    d.name = std::string(kind);
    d.range = {-1.0, 1.0};
    d.samples = Matrix(n, 2);

    if (kind == "eight_gaussians") {
        const double sigma = noise.value_or(0.05);
        const auto centers = eight_gaussian_centers();
        const auto counts = stratified_counts(n, 8);
        std::size_t r = 0;
        for (std::size_t c = 0; c < 8; ++c) {
            for (std::size_t i = 0; i < counts[c]; ++i, ++r) {
                d.samples(r, 0) = centers[c].first + sigma * rng.normal();
                d.samples(r, 1) = centers[c].second + sigma * rng.normal();
                d.labels.push_back(static_cast<std::int32_t>(c));
            }
        }
        d.num_classes = 8;
    } else if (kind == "two_moons") {
        const double sigma = noise.value_or(0.05);
        const auto counts = stratified_counts(n, 2);
        std::size_t r = 0;
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < counts[c]; ++i, ++r) {
                const double t = rng.uniform(0.0, std::numbers::pi);
                double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
                double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
                x += sigma * rng.normal();
                y += sigma * rng.normal();
                const auto [u, v] = moons_to_dataset(x, y);
                d.samples(r, 0) = u;
                d.samples(r, 1) = v;
                d.labels.push_back(static_cast<std::int32_t>(c));
            }
        }
        d.num_classes = 2;
    } else if (kind == "two_rings") {
        const double sigma = noise.value_or(0.04);
        for (std::size_t r = 0; r < n; ++r) {
            const double radius = rng.bernoulli(0.5) ? 0.35 : 0.75;
            const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
            d.samples(r, 0) = radius * std::cos(a) + sigma * rng.normal();
            d.samples(r, 1) = radius * std::sin(a) + sigma * rng.normal();
        }
    } else if (kind == "checkerboard") {
        for (std::size_t r = 0; r < n; ++r) {
            const double x1 = rng.uniform(-2.0, 2.0);
            const double x2 = rng.uniform() - 2.0 * static_cast<double>(rng.index(2)) +
                              static_cast<double>(static_cast<long>(std::floor(x1)) & 1);
            d.samples(r, 0) = x1 / 2.0;
            d.samples(r, 1) = x2 / 2.0;
        }
    } else {
        throw ConfigError("unknown 2D dataset kind '" + std::string(kind) +
                          "' (eight_gaussians|two_rings|checkerboard|two_moons)");
    }
    clamp_all(d);
    shuffle_rows(d, rng);
    return d;
}

std::uint8_t unit_to_pixel(double v) {
    const double p = std::round((v + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(p, 0.0, 255.0));
}

Dataset load_grid(const std::filesystem::path& path) {
    io::ByteReader in = io::ByteReader::load(path);
    if (in.remaining() < 24) throw DataError("malformed grid header: file shorter than header");
    try {
        in.expect_magic(kGridMagic);
    } catch (const DataError&) {
        throw DataError("malformed grid header: bad magic in " + path.string());
    }
    const std::size_t n = in.u32("N");
    RasterShape shape{in.u32("H"), in.u32("W"), in.u32("channels")};
    const std::size_t classes = in.u32("num_classes");
    if (shape.size() == 0) throw DataError("malformed grid header: zero image extent");
    if (classes > 65536) throw DataError("malformed grid header: too many classes");

    const std::size_t payload = n * shape.size();
    const std::size_t label_bytes = classes > 0 ? 2 * n : 0;
    if (in.remaining() != payload + label_bytes) {
        throw DataError("truncated grid payload: header promises " +
                        std::to_string(payload + label_bytes) + " bytes, file has " +
                        std::to_string(in.remaining()));
    }
    Dataset d;
    d.name = path.filename().string();
    d.range = {-1.0, 1.0};
    d.raster = shape;
    d.num_classes = classes;
    d.samples = Matrix(n, shape.size());
    const auto pixels = in.bytes(payload, "pixels");
    for (std::size_t i = 0; i < payload; ++i) d.samples.data[i] = pixel_to_unit(pixels[i]);
    if (classes > 0) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint16_t y = in.u16("label");
            if (y >= classes) {
                throw DataError("grid label out of range: " + std::to_string(y) + " >= " +
                                std::to_string(classes));
            }
            d.labels.push_back(y);
        }
    }
    return d;
}

void save_grid(const std::filesystem::path& path, const Dataset& data) {
    if (!data.raster) throw ConfigError("save_grid: dataset has no raster shape");
    if (data.raster->size() != data.dim()) throw ConfigError("save_grid: raster shape != D");
    io::ByteWriter w;
    w.magic(kGridMagic);
    w.u32(static_cast<std::uint32_t>(data.size()));
    w.u32(static_cast<std::uint32_t>(data.raster->height));
    w.u32(static_cast<std::uint32_t>(data.raster->width));
    w.u32(static_cast<std::uint32_t>(data.raster->channels));
    w.u32(static_cast<std::uint32_t>(data.labeled() ? data.num_classes : 0));
    for (double v : data.samples.data) w.u8(unit_to_pixel(v));
    if (data.labeled())
        for (std::int32_t y : data.labels) w.u16(static_cast<std::uint16_t>(y));
    w.save(path);
}

void flip_horizontal(std::span<double> sample, const RasterShape& shape) {
    for (std::size_t r = 0; r < shape.height; ++r)
        for (std::size_t c = 0; c < shape.width / 2; ++c)
            for (std::size_t ch = 0; ch < shape.channels; ++ch)
                std::swap(sample[(r * shape.width + c) * shape.channels + ch],
                          sample[(r * shape.width + (shape.width - 1 - c)) * shape.channels + ch]);
}

Matrix augment(const Matrix& batch, const Dataset& data, Rng& rng, const AugmentConfig& cfg) {
    Matrix out = batch;
    if (!cfg.enabled) return out;
    if (!data.raster) {
        for (double& v : out.data) v = data.range.clamp(v + cfg.jitter_sigma * rng.normal());
        return out;
    }
    const RasterShape& s = *data.raster;
    std::vector<double> tmp(s.size());
    for (std::size_t i = 0; i < out.rows; ++i) {
        auto row = out.row(i);
        if (cfg.flip && rng.bernoulli(0.5)) flip_horizontal(row, s);
        if (cfg.max_shift > 0) {
            const auto span = static_cast<long>(2 * cfg.max_shift + 1);
            const long dy = static_cast<long>(rng.index(span)) - static_cast<long>(cfg.max_shift);
            const long dx = static_cast<long>(rng.index(span)) - static_cast<long>(cfg.max_shift);
            const long h = static_cast<long>(s.height), w = static_cast<long>(s.width);
            for (long r = 0; r < h; ++r) {
                const long sr = std::clamp(r - dy, 0L, h - 1);
                for (long c = 0; c < w; ++c) {
                    const long sc = std::clamp(c - dx, 0L, w - 1);
                    for (std::size_t ch = 0; ch < s.channels; ++ch)
                        tmp[(r * w + c) * s.channels + ch] = row[(sr * w + sc) * s.channels + ch];
                }
            }
            std::copy(tmp.begin(), tmp.end(), row.begin());
        }
        if (cfg.dequantize) {
            for (double& v : row) v += rng.uniform(-1.0, 1.0) / 255.0;
        }
        for (double& v : row) v = data.range.clamp(v);
    }
    return out;
}

Batch sample_batch(const Dataset& data, std::size_t count, Rng& rng) {
    if (data.size() == 0) throw DataError("cannot draw a batch from an empty dataset");
    Batch b{Matrix(count, data.dim()), {}, false};
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t idx = rng.index(data.size());
        auto src = data.samples.row(idx);
        std::copy(src.begin(), src.end(), b.x.row(r).begin());
        if (data.labeled()) b.labels.push_back(data.labels[idx]);
    }
    return b;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, Rng& rng) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
    std::span<const std::size_t> all(order);
    return {data.subset(all.first(cut)), data.subset(all.subspan(cut))};
}

Dataset load_dataset(std::string_view spec, std::uint64_t seed) {
    constexpr std::string_view prefix = "synth:";
    if (!spec.starts_with(prefix)) return load_grid(std::filesystem::path(std::string(spec)));
    std::string_view rest = spec.substr(prefix.size());
    std::string kind;
    std::size_t n = 8000;
    std::optional<double> noise;
    std::size_t field = 0;
    while (!rest.empty()) {
        const auto colon = rest.find(':');
        const std::string_view part = rest.substr(0, colon);
        if (field == 0) {
            kind = std::string(part);
        } else if (part.starts_with("n=")) {
            n = std::stoull(std::string(part.substr(2)));
        } else if (part.starts_with("noise=")) {
            noise = std::stod(std::string(part.substr(6)));
        } else {
            throw ConfigError("bad dataset option '" + std::string(part) + "'");
        }
        ++field;
        rest = colon == std::string_view::npos ? std::string_view{} : rest.substr(colon + 1);
    }
    return synth_2d(kind, n, seed, noise);
}

}  // namespace mebm
