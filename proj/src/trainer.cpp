#include "mebm/trainer.hpp"

#include "mebm/error.hpp"
#include "mebm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mebm {
namespace {

constexpr std::string_view kCheckpointMagic = "EBMC";
constexpr std::uint32_t kCheckpointVersion = 1;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_optional_range(io::ByteWriter& out, const std::optional<Range>& r) {
    out.u8(r ? 1 : 0);
    out.f64(r ? r->lo : 0.0);
    out.f64(r ? r->hi : 0.0);
}

std::optional<Range> read_optional_range(io::ByteReader& in) {
    const bool set = in.u8("range flag") != 0;
    const double lo = in.f64("range lo"), hi = in.f64("range hi");
    return set ? std::optional<Range>(Range{lo, hi}) : std::nullopt;
}

void write_breakdown(io::ByteWriter& out, const LossBreakdown& b) {
    out.f64(b.gen_loss);
    out.u8(b.clf_loss ? 1 : 0);
    out.f64(b.clf_loss.value_or(0.0));
    out.f64(b.e_pos_mean);
    out.f64(b.e_neg_mean);
    out.f64(b.e_pos_sq_mean);
    out.f64(b.e_neg_sq_mean);
    out.f64(b.total);
    out.u8(b.accuracy ? 1 : 0);
    out.f64(b.accuracy.value_or(0.0));
}

LossBreakdown read_breakdown(io::ByteReader& in) {
    LossBreakdown b;
    b.gen_loss = in.f64("gen_loss");
    const bool has_clf = in.u8("clf flag") != 0;
    const double clf = in.f64("clf_loss");
    if (has_clf) b.clf_loss = clf;
    b.e_pos_mean = in.f64("e_pos_mean");
    b.e_neg_mean = in.f64("e_neg_mean");
    b.e_pos_sq_mean = in.f64("e_pos_sq_mean");
    b.e_neg_sq_mean = in.f64("e_neg_sq_mean");
    b.total = in.f64("total");
    const bool has_acc = in.u8("acc flag") != 0;
    const double acc = in.f64("accuracy");
    if (has_acc) b.accuracy = acc;
    return b;
}

AugmentConfig augment_config(const TrainConfig& cfg) {
    AugmentConfig a;
    a.jitter_sigma = cfg.jitter_sigma;
    return a;
}

void render_samples(const Matrix& samples, const Dataset& data, const std::filesystem::path& path_stem) {
    if (samples.rows == 0) return;
    auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(samples.rows))));
    const std::size_t rows = (samples.rows + cols - 1) / cols;
    auto path = path_stem;
    path += data.raster ? ".ppm" : ".txt";
    render_grid(samples, rows, cols, path, data.raster);
}

}  // namespace

void SgdMomentum::step(std::span<const NamedParameter> params) {
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const auto& p : params) velocity_.emplace_back(p.tensor.numel(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].tensor;
        if (!t.has_grad()) continue;
        auto values = t.mutable_values();
        const auto grad = t.grad();
        auto& v = velocity_[i];
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] = momentum_ * v[j] + grad[j];
            values[j] -= lr_ * v[j];
        }
    }
}

MonitorResult divergence_monitor(std::span<const LossBreakdown> history, double threshold,
                                 std::size_t window) {
    if (window == 0) throw ConfigError("divergence_monitor: window must be >= 1");
    double running = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const LossBreakdown& b = history[i];
        if (!b.finite()) return {true, i, "non-finite loss or energy"};
        running += std::abs(b.energy_gap());
        if (i >= window) running -= std::abs(history[i - window].energy_gap());
        if (i + 1 >= window) {
            // Recompute exactly to avoid drift in the running sum.
            double s = 0.0;
            for (std::size_t j = i + 1 - window; j <= i; ++j) s += std::abs(history[j].energy_gap());
            running = s;
            const double mean = s / static_cast<double>(window);
            if (mean > threshold) {
                return {true, i, "windowed mean |E+ - E-| = " + num(mean) + " exceeds " + num(threshold)};
            }
        }
    }
    return {};
}

TrainState init_state(const TrainConfig& cfg, const Dataset& data) {
    cfg.validate();
    if (data.size() == 0) throw DataError("training dataset is empty");
    if (cfg.mode != Mode::Uncond && !data.labeled())
        throw ConfigError(std::string(to_string(cfg.mode)) + " mode needs a labeled dataset");

    ModelSpec spec;
    spec.mode = cfg.mode;
    spec.input_dim = data.dim();
    const std::size_t width = cfg.hidden_width > 0 ? cfg.hidden_width : (data.raster ? 256 : 128);
    spec.hidden.assign(cfg.hidden_layers, width);
    spec.num_classes = cfg.mode == Mode::Uncond ? 0 : data.num_classes;
    spec.slope = cfg.leaky_slope;
    spec.seed = cfg.seed;

    InitDistribution p0;
    switch (cfg.init) {
        case InitMode::Informative: p0 = fit_gaussian(data.samples, cfg.eps_reg); break;
        case InitMode::Mixture:
            if (!data.labeled()) throw ConfigError("mixture init needs a labeled dataset");
            p0 = fit_per_class(data.samples, data.labels, cfg.eps_reg);
            break;
        case InitMode::Uniform: p0 = UniformInit{data.range, data.dim()}; break;
    }

    TrainState s{
        EnergyModel(spec),
        std::move(p0),
        ReplayBuffer(cfg.buffer_capacity, data.dim(), cfg.reinit_prob),
        SgdMomentum(cfg.learning_rate, cfg.momentum),
        0,
        {},
        Rng::derive(cfg.seed, "data"),
        Rng::derive(cfg.seed, "sgld"),
        Rng::derive(cfg.seed, "init"),
        Rng::derive(cfg.seed, "augment"),
        Matrix(0, data.dim()),
        std::nullopt,
        std::nullopt,
    };
    if (cfg.sgld_clamp_auto) {
        if (data.raster) s.sgld_clamp = data.range;
    } else {
        s.sgld_clamp = cfg.sgld.clamp_range;
    }
    if (cfg.init_clamp) s.init_clamp = data.range;
    return s;
}

std::pair<Batch, Batch> next_batches(TrainState& state, const Dataset& data, const TrainConfig& cfg) {
    const AugmentConfig acfg = augment_config(cfg);
    Batch gen = sample_batch(data, cfg.gen_batch, state.data_rng);
    if (cfg.augment_gen_batch) {
        gen.x = augment(gen.x, data, state.augment_rng, acfg);
        gen.augmented = true;
    }
    Batch clf;
    if (cfg.mode != Mode::Uncond) {
        clf = sample_batch(data, cfg.clf_batch, state.data_rng);
        if (cfg.augment) {
            clf.x = augment(clf.x, data, state.augment_rng, acfg);
            clf.augmented = true;
        }
    }
    return {std::move(clf), std::move(gen)};
}

LossBreakdown train_step(TrainState& state, const Batch& batch_clf, const Batch& batch_gen,
                         const TrainConfig& cfg) {
    if (batch_gen.augmented != cfg.augment_gen_batch) {
        throw InvariantError(batch_gen.augmented
                                 ? "augmented batch reached the likelihood term"
                                 : "likelihood batch expected to be augmented in this ablation");
    }
    const auto iter = static_cast<std::int64_t>(state.iteration);

    const InitDraw draw = draw_init(state.buffer, state.p0, cfg.gen_batch, state.init_rng, state.init_clamp);
    SgldConfig sgld = cfg.sgld;
    sgld.clamp_range = state.sgld_clamp;
    Matrix negatives;
    try {
        negatives = sgld_chain(state.model, draw.samples, sgld, state.sgld_rng);
    } catch (const DivergenceError& e) {
        throw DivergenceError("iteration " + std::to_string(iter) + ": " + e.what(), iter, e.value());
    }

    const Tensor x_pos = inject_noise(batch_gen.x.to_tensor(), cfg.inject_sigma, state.augment_rng);
    const Tensor x_neg = negatives.to_tensor();
    Loss loss = cfg.mode == Mode::Uncond
                    ? generative_loss(state.model, x_pos, x_neg, cfg.reg_coeff)
                    : joint_loss(state.model, batch_clf.x.to_tensor(), batch_clf.labels, x_pos, x_neg,
                                 cfg.reg_coeff);

    state.history.push_back(loss.breakdown);
    const std::size_t w = cfg.divergence_window;
    const std::size_t tail = std::min(state.history.size(), w);
    std::span<const LossBreakdown> recent(state.history.data() + state.history.size() - tail, tail);
    if (const auto m = divergence_monitor(recent, cfg.divergence_threshold, w); m.diverged) {
        throw DivergenceError("iteration " + std::to_string(iter) + ": " + m.reason, iter,
                              loss.breakdown.energy_gap());
    }

    state.model.zero_grad();
    loss.total.backward();
    state.optimizer.step(state.model.parameters());
    state.buffer.push(negatives, state.sgld_rng);
    state.last_negatives = std::move(negatives);
    ++state.iteration;
    return loss.breakdown;
}

std::string metrics_csv_header(Mode mode) {
    std::string h = "iter,clf_loss,gen_loss,e_pos_mean,e_neg_mean,e_pos_sq_mean,e_neg_sq_mean";
    if (mode != Mode::Uncond) h += ",acc";
    return h + "\n";
}

std::string metrics_csv_row(std::size_t iteration, const LossBreakdown& b, Mode mode) {
    std::ostringstream os;
    os << iteration << ',' << (b.clf_loss ? num(*b.clf_loss) : std::string()) << ',' << num(b.gen_loss)
       << ',' << num(b.e_pos_mean) << ',' << num(b.e_neg_mean) << ',' << num(b.e_pos_sq_mean) << ','
       << num(b.e_neg_sq_mean);
    if (mode != Mode::Uncond) os << ',' << (b.accuracy ? num(*b.accuracy) : std::string());
    os << '\n';
    return os.str();
}

void run_training(TrainState& state, const TrainConfig& cfg, const Dataset& data,
                  std::size_t until_iteration, const RunOptions& options) {
    std::ofstream metrics;
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        const auto path = *options.out_dir / "metrics.csv";
        if (state.iteration == 0 || !std::filesystem::exists(path)) {
            metrics.open(path, std::ios::trunc);
            metrics << metrics_csv_header(cfg.mode);
        } else {
            metrics.open(path, std::ios::app);
        }
        if (!metrics) throw DataError("cannot write " + path.string());
    }
    const std::size_t sample_period = cfg.sample_every > 0 ? cfg.sample_every : cfg.iters_per_epoch;

    while (state.iteration < until_iteration) {
        auto [clf, gen] = next_batches(state, data, cfg);
        LossBreakdown b;
        try {
            b = train_step(state, clf, gen, cfg);
        } catch (const DivergenceError& e) {
            if (options.out_dir) {
                io::write_text(*options.out_dir / "divergence.txt",
                               std::string("diverged at iteration ") + std::to_string(e.iteration()) +
                                   "\nvalue " + num(e.value()) + "\n" + e.what() + "\n");
            }
            throw;
        }
        if (options.out_dir) {
            metrics << metrics_csv_row(state.iteration - 1, b, cfg.mode);
            if (state.iteration % cfg.iters_per_epoch == 0 || state.iteration == until_iteration) {
                metrics.flush();
                const auto tmp = *options.out_dir / "checkpoint.bin.tmp";
                state.save(tmp, cfg);
                std::filesystem::rename(tmp, *options.out_dir / "checkpoint.bin");
            }
            if (state.iteration % sample_period == 0) {
                render_samples(state.last_negatives, data,
                               *options.out_dir / ("samples_iter_" + std::to_string(state.iteration)));
            }
        }
        if (options.on_step) options.on_step(state, b);
    }
}

TrainState train_loop(const TrainConfig& cfg, const Dataset& data, const RunOptions& options) {
    TrainState state = init_state(cfg, data);
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        save_init(*options.out_dir / "init.bin", state.p0);
    }
    run_training(state, cfg, data, cfg.total_iterations(), options);
    if (options.out_dir && cfg.total_iterations() == 0) {
        // Still write the header-only metrics file and an iteration-0 checkpoint.
        state.save(*options.out_dir / "checkpoint.bin", cfg);
    }
    return state;
}

void TrainState::save(io::ByteWriter& out, const TrainConfig& cfg) const {
    out.magic(kCheckpointMagic);
    out.u32(kCheckpointVersion);
    out.str(cfg.to_text());
    out.u64(iteration);
    model.save(out);
    save_init(out, p0);
    buffer.save(out);
    out.u64(optimizer.velocity().size());
    for (const auto& v : optimizer.velocity()) out.f64_array(v);
    out.str(data_rng.serialize());
    out.str(sgld_rng.serialize());
    out.str(init_rng.serialize());
    out.str(augment_rng.serialize());
    out.u64(history.size());
    for (const auto& b : history) write_breakdown(out, b);
    out.u64(last_negatives.rows);
    out.u64(last_negatives.cols);
    for (double v : last_negatives.data) out.f64(v);
    write_optional_range(out, sgld_clamp);
    write_optional_range(out, init_clamp);
}

void TrainState::save(const std::filesystem::path& path, const TrainConfig& cfg) const {
    io::ByteWriter w;
    save(w, cfg);
    w.save(path);
}

std::pair<TrainState, TrainConfig> TrainState::load(io::ByteReader& in) {
    in.expect_magic(kCheckpointMagic);
    if (const auto v = in.u32("checkpoint version"); v != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(v));
    TrainConfig cfg = parse_config(in.str("config"));
    const std::size_t iteration = in.u64("iteration");
    EnergyModel model = EnergyModel::load(in);
    InitDistribution p0 = load_init(in);
    ReplayBuffer buffer = ReplayBuffer::load(in);
    SgdMomentum opt(cfg.learning_rate, cfg.momentum);
    std::vector<std::vector<double>> velocity(in.u64("velocity count"));
    for (auto& v : velocity) v = in.f64_array("velocity");
    opt.set_velocity(std::move(velocity));
    Rng data_rng = Rng::deserialize(in.str("data rng"));
    Rng sgld_rng = Rng::deserialize(in.str("sgld rng"));
    Rng init_rng = Rng::deserialize(in.str("init rng"));
    Rng augment_rng = Rng::deserialize(in.str("augment rng"));
    std::vector<LossBreakdown> history(in.u64("history length"));
    for (auto& b : history) b = read_breakdown(in);
    Matrix last;
    last.rows = in.u64("negatives rows");
    last.cols = in.u64("negatives cols");
    last.data.resize(last.rows * last.cols);
    for (double& v : last.data) v = in.f64("negatives");
    auto sgld_clamp = read_optional_range(in);
    auto init_clamp = read_optional_range(in);
    TrainState s{std::move(model), std::move(p0),       std::move(buffer),     std::move(opt),
                 iteration,        std::move(history),  std::move(data_rng),   std::move(sgld_rng),
                 std::move(init_rng), std::move(augment_rng), std::move(last), sgld_clamp,
                 init_clamp};
    return {std::move(s), std::move(cfg)};
}

std::pair<TrainState, TrainConfig> TrainState::load(const std::filesystem::path& path) {
    auto r = io::ByteReader::load(path);
    return load(r);
}

}  // namespace mebm
