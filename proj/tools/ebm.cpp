// ebm: fit initializers, train, sample, evaluate and inspect.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 divergence, 5 internal.

#include "manifest.hpp"

#include "mebm/binary_io.hpp"
#include "mebm/config.hpp"
#include "mebm/datasets.hpp"
#include "mebm/error.hpp"
#include "mebm/eval.hpp"
#include "mebm/experiment.hpp"
#include "mebm/init_dist.hpp"
#include "mebm/sgld.hpp"
#include "mebm/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace mebm;
using ebm_cli::Manifest;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kDiverged = 4, kInternal = 5 };

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::optional<std::string> init;
    std::optional<std::string> mode;
    std::optional<double> inject_sigma;
    std::optional<double> reg_coeff;

    void add_to(CLI::App* cmd, bool with_k = true) {
        cmd->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "run seed");
        if (with_k) cmd->add_option("--k", k, "SGLD steps per iteration");
        cmd->add_option("--init", init, "informative|uniform|mixture");
        cmd->add_option("--mode", mode, "uncond|mjem|lsejem");
        cmd->add_option("--inject-sigma", inject_sigma, "std of noise added to negatives before the loss");
        cmd->add_option("--reg-coeff", reg_coeff, "energy-magnitude penalty weight");
    }

    TrainConfig build(Manifest& m) const {
        TrainConfig cfg;
        if (!config.empty()) {
            cfg = load_config(config);
            m.input("config", config, ebm_cli::git_blob_hash_file(config));
        }
        const auto set = [&](const char* key, const std::string& value) {
            apply_config_value(cfg, key, value);
            m.arg(key, value);
        };
        if (seed) set("seed", std::to_string(*seed));
        if (k) set("sgld_steps", std::to_string(*k));
        if (init) set("init", *init);
        if (mode) set("mode", *mode);
        const auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        if (inject_sigma) set("inject_sigma", num(*inject_sigma));
        if (reg_coeff) set("reg_coeff", num(*reg_coeff));
        cfg.validate();
        m.seed(cfg.seed);
        m.config(cfg.to_text());
        return cfg;
    }
};

Dataset load_data(const std::string& spec, std::uint64_t seed, Manifest& m, const char* role = "data") {
    Dataset d = load_dataset(spec, seed);
    m.input(role, spec, ebm_cli::dataset_hash(d));
    return d;
}

std::pair<TrainState, TrainConfig> load_checkpoint(const std::string& path, Manifest& m) {
    auto loaded = TrainState::load(path);
    m.input("checkpoint", path, ebm_cli::git_blob_hash_file(path));
    m.seed(loaded.second.seed);
    m.config(loaded.second.to_text());
    return loaded;
}

// Square-ish tiling, or an inferred square raster when D is H·H or 3·H·H.
void render(const Matrix& samples, const fs::path& stem, std::optional<RasterShape> shape, Manifest& m) {
    if (samples.rows == 0) return;
    if (!shape && samples.cols != 2) {
        for (std::size_t ch : {1u, 3u}) {
            if (samples.cols % ch) continue;
            const auto side = static_cast<std::size_t>(std::lround(std::sqrt(samples.cols / ch)));
            if (side * side * ch == samples.cols) {
                shape = RasterShape{side, side, ch};
                break;
            }
        }
        if (!shape) return;
    }
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(samples.rows))));
    const std::size_t rows = (samples.rows + cols - 1) / cols;
    fs::path path = stem;
    path += shape ? ".ppm" : ".txt";
    render_grid(samples, rows, cols, path, shape);
    m.output(path.filename());
}

std::string format_vector(std::span<const double> v) {
    std::ostringstream os;
    os.precision(6);
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    return os.str() + ']';
}

std::string describe(const InitDistribution& dist) {
    std::ostringstream os;
    os << "kind: " << init_kind(dist) << "\ndim: " << init_dim(dist) << '\n';
    const auto gaussian = [&](const GaussianInit& g, const std::string& indent) {
        os << indent << "mean: " << format_vector(g.mean) << '\n';
        os << indent << "eps_reg: " << g.eps_reg << '\n';
        const Matrix c = g.covariance();
        const std::size_t shown = std::min<std::size_t>(c.rows, 8);
        os << indent << "covariance" << (shown < c.rows ? " (leading 8x8 block)" : "") << ":\n";
        for (std::size_t i = 0; i < shown; ++i)
            os << indent << "  " << format_vector(std::span(c.data).subspan(i * c.cols, shown)) << '\n';
    };
    if (const auto* g = std::get_if<GaussianInit>(&dist)) {
        gaussian(*g, "");
    } else if (const auto* mix = std::get_if<MixtureInit>(&dist)) {
        for (std::size_t i = 0; i < mix->components.size(); ++i) {
            os << "component " << i << ": label " << mix->components[i].label << ", weight " << mix->weights[i]
               << '\n';
            gaussian(mix->components[i].gaussian, "  ");
        }
    } else {
        const auto& u = std::get<UniformInit>(dist);
        os << "range: [" << u.range.lo << ", " << u.range.hi << "]\n";
    }
    return os.str();
}

std::vector<InitMode> parse_inits(const std::vector<std::string>& names) {
    std::vector<InitMode> out;
    for (const auto& n : names) out.push_back(parse_init_mode(n));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-based model training with informative SGLD initialization"};
    app.require_subcommand(1);

    std::string data_spec, out_dir, checkpoint, init_file, source = "fresh-chain";
    std::size_t count = 64, bins = 40, max_iters = 500;
    bool resume = false;
    std::vector<std::size_t> k_list{1, 5, 10};
    std::vector<std::string> init_list{"informative", "uniform"};
    std::vector<std::uint64_t> seed_list{1, 2, 3, 4, 5};

    Overrides fit_o, train_o, bench_o;
    std::optional<std::uint64_t> seed_only;
    std::optional<std::size_t> k_only;

    auto* fit = app.add_subcommand("fit-init", "fit p0 on a dataset and save it");
    fit_o.add_to(fit, false);
    fit->add_option("--data", data_spec, "synth:<kind>[:n=..][:noise=..] or a grid file")->required();
    fit->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model");
    train_o.add_to(train);
    train->add_option("--data", data_spec, "synth:<kind>[:n=..][:noise=..] or a grid file")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_flag("--resume", resume, "continue from <out>/checkpoint.bin when its config matches");

    auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
    sample->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required()->check(CLI::ExistingFile);
    sample->add_option("--out", out_dir, "output directory")->required();
    sample->add_option("--count", count, "number of samples");
    sample->add_option("--source", source, "fresh-chain|buffer")
        ->check(CLI::IsMember({"fresh-chain", "buffer"}));
    sample->add_option("--seed", seed_only, "sampling seed (default: the checkpoint's)");
    sample->add_option("--k", k_only, "chain length (default: the checkpoint's)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against held-out data");
    eval->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_spec, "held-out dataset spec")->required();
    eval->add_option("--out", out_dir, "output directory")->required();
    eval->add_option("--count", count, "generated samples (held-out needs twice as many rows)");
    eval->add_option("--bins", bins, "histogram bins");
    eval->add_option("--seed", seed_only, "evaluation seed (default: the checkpoint's)");

    auto* inspect = app.add_subcommand("inspect-init", "print a stored p0");
    auto* inspect_src = inspect->add_option_group("source");
    inspect_src->add_option("--init-file", init_file, "init.bin")->check(CLI::ExistingFile);
    inspect_src->add_option("--checkpoint", checkpoint, "checkpoint.bin")->check(CLI::ExistingFile);
    inspect_src->require_option(1);
    inspect->add_option("--out", out_dir, "also write inspect.txt and a manifest here");

    auto* bench = app.add_subcommand("bench-stability", "divergence matrix over K, init and seed");
    bench_o.add_to(bench, false);
    bench->add_option("--data", data_spec, "dataset spec")->required();
    bench->add_option("--out", out_dir, "output directory")->required();
    bench->add_option("--k", k_list, "comma-separated K values")->delimiter(',');
    bench->add_option("--inits", init_list, "comma-separated init modes")->delimiter(',');
    bench->add_option("--seeds", seed_list, "comma-separated seeds")->delimiter(',');
    bench->add_option("--max-iters", max_iters, "iteration cap per cell (0 = config length)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    if (eval->parsed() && eval->count("--count") == 0) count = 2000;

    try {
        if (fit->parsed()) {
            Manifest m("fit-init");
            const TrainConfig cfg = fit_o.build(m);
            const Dataset data = load_data(data_spec, cfg.seed, m);
            if (data.size() == 0) throw DataError("dataset '" + data_spec + "' is empty");
            InitDistribution p0;
            switch (cfg.init) {
                case InitMode::Informative: p0 = fit_gaussian(data.samples, cfg.eps_reg); break;
                case InitMode::Mixture:
                    if (!data.labeled()) throw ConfigError("init=mixture needs a labeled dataset");
                    p0 = fit_per_class(data.samples, data.labels, cfg.eps_reg);
                    break;
                case InitMode::Uniform: p0 = UniformInit{data.range, data.dim()}; break;
            }
            fs::create_directories(out_dir);
            save_init(fs::path(out_dir) / "init.bin", p0);
            io::write_text(fs::path(out_dir) / "init.txt", describe(p0));
            m.output("init.bin");
            m.output("init.txt");
            m.write(out_dir);
            std::cout << describe(p0);
        } else if (train->parsed()) {
            Manifest m("train");
            const TrainConfig cfg = train_o.build(m);
            const Dataset data = load_data(data_spec, cfg.seed, m);
            const fs::path out(out_dir);
            fs::create_directories(out);
            io::write_text(out / "config.txt", cfg.to_text());
            RunOptions opt{out, {}};
            const std::size_t report_every = std::max<std::size_t>(1, cfg.iters_per_epoch);
            opt.on_step = [&](const TrainState& s, const LossBreakdown& b) {
                if (s.iteration % report_every == 0 || s.iteration == cfg.total_iterations())
                    std::fprintf(stderr, "iter %zu  gen_loss %.6g  E+ %.6g  E- %.6g\n", s.iteration, b.gen_loss,
                                 b.e_pos_mean, b.e_neg_mean);
            };
            bool resumed = false;
            if (resume && fs::exists(out / "checkpoint.bin")) {
                auto [state, saved] = TrainState::load(out / "checkpoint.bin");
                if (saved.to_text() == cfg.to_text()) {
                    run_training(state, cfg, data, cfg.total_iterations(), opt);
                    resumed = true;
                }
            }
            const auto finish = [&] {
                m.output("config.txt");
                m.output("metrics.csv");
                if (fs::exists(out / "init.bin")) m.output("init.bin");
                if (fs::exists(out / "checkpoint.bin")) m.output("checkpoint.bin");
                if (fs::exists(out / "divergence.txt")) m.output("divergence.txt");
                m.write(out);
            };
            try {
                if (!resumed) train_loop(cfg, data, opt);
            } catch (const DivergenceError&) {
                finish();
                throw;
            }
            finish();
        } else if (sample->parsed()) {
            Manifest m("sample");
            auto [state, cfg] = load_checkpoint(checkpoint, m);
            m.arg("count", std::to_string(count));
            m.arg("source", source);
            if (seed_only) m.arg("seed", std::to_string(*seed_only));
            if (k_only) m.arg("k", std::to_string(*k_only));
            Matrix out_rows(0, state.model.input_dim());
            if (source == "buffer") {
                if (state.buffer.empty()) throw DataError("checkpoint has an empty replay buffer");
                const std::size_t n = std::min(count, state.buffer.size());
                out_rows = Matrix(n, state.buffer.dim());
                std::copy_n(state.buffer.entries().data.begin(), n * state.buffer.dim(), out_rows.data.begin());
            } else {
                Rng rng = Rng::derive(seed_only.value_or(cfg.seed), "sample");
                out_rows = fresh_chain_samples(state, cfg, count, rng, k_only.value_or(0));
            }
            const fs::path out(out_dir);
            fs::create_directories(out);
            write_buffer_dump(out / "samples.bin", out_rows);
            m.output("samples.bin");
            render(out_rows, out / "samples", std::nullopt, m);
            m.write(out);
            std::cout << out_rows.rows << " samples written to " << (out / "samples.bin").string() << '\n';
        } else if (eval->parsed()) {
            Manifest m("eval");
            auto [state, cfg] = load_checkpoint(checkpoint, m);
            const std::uint64_t seed = seed_only.value_or(cfg.seed);
            m.arg("count", std::to_string(count));
            m.arg("bins", std::to_string(bins));
            m.arg("seed", std::to_string(seed));
            // Held-out synthetic data comes from a seed the training run never used.
            const Dataset heldout = load_data(data_spec, mix64(seed ^ 0x68656c646f7574ULL), m, "heldout");
            Rng rng = Rng::derive(seed, "eval");
            EvalOptions opts;
            opts.sample_count = count;
            opts.histogram_bins = bins;
            const EvalArtifacts a = evaluate(state, cfg, heldout, rng, opts);
            const fs::path out(out_dir);
            fs::create_directories(out);
            char extra[128];
            std::snprintf(extra, sizeof extra, "reference_mmd,%.17g\nmmd_ratio,%.17g\n", a.reference_mmd,
                          a.reference_mmd > 0 ? a.report.mmd / a.reference_mmd : INFINITY);
            io::write_text(out / "eval.csv", a.report.to_csv() + extra);
            io::write_text(out / "histogram.csv", a.histogram.to_csv());
            io::write_text(out / "histogram.txt", a.histogram.render());
            io::write_text(out / "manifold.csv", a.manifold.to_csv());
            for (const char* f : {"eval.csv", "histogram.csv", "histogram.txt", "manifold.csv"}) m.output(f);
            render(a.generated, out / "generated", heldout.raster, m);
            m.write(out);
            std::cout << a.report.to_csv() << extra;
        } else if (inspect->parsed()) {
            Manifest m("inspect-init");
            InitDistribution p0;
            if (!init_file.empty()) {
                p0 = load_init(init_file);
                m.input("init", init_file, ebm_cli::git_blob_hash_file(init_file));
            } else {
                p0 = load_checkpoint(checkpoint, m).first.p0;
            }
            const std::string text = describe(p0);
            std::cout << text;
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                io::write_text(fs::path(out_dir) / "inspect.txt", text);
                m.output("inspect.txt");
                m.write(out_dir);
            }
        } else if (bench->parsed()) {
            Manifest m("bench-stability");
            const TrainConfig cfg = bench_o.build(m);
            StabilityGrid grid;
            grid.ks = k_list;
            grid.inits = parse_inits(init_list);
            grid.seeds = seed_list;
            grid.max_iters = max_iters;
            std::string ks, seeds;
            for (auto k : k_list) ks += (ks.empty() ? "" : ",") + std::to_string(k);
            for (auto s : seed_list) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
            m.arg("k", ks);
            m.arg("seeds", seeds);
            m.arg("max_iters", std::to_string(max_iters));
            const Dataset data = load_data(data_spec, cfg.seed, m);
            const auto cells = bench_stability(cfg, data, grid, worker_threads());
            const fs::path out(out_dir);
            fs::create_directories(out);
            io::write_text(out / "stability.csv", stability_csv(cells));
            io::write_text(out / "stability_summary.csv", stability_summary_csv(cells));
            m.output("stability.csv");
            m.output("stability_summary.csv");
            m.write(out);
            std::cout << stability_summary_csv(cells);
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
