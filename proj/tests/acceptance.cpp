// Acceptance suite: one PASS/FAIL line per criterion.
//
//   ebm_acceptance [--out DIR] [--only 1,2,...]
//
// Training runs leave their metrics, evaluations and sample scatters under DIR.

#include "support.hpp"

#include "mebm/binary_io.hpp"
#include "mebm/datasets.hpp"
#include "mebm/energy_model.hpp"
#include "mebm/error.hpp"
#include "mebm/eval.hpp"
#include "mebm/experiment.hpp"
#include "mebm/init_dist.hpp"
#include "mebm/objectives.hpp"
#include "mebm/ops.hpp"
#include "mebm/sgld.hpp"
#include "mebm/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace mebm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double frobenius(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(s);
}

// Toy-scale training setup shared by the generation, hybrid and determinism runs.
TrainConfig toy_config(Mode mode, std::uint64_t seed) {
    TrainConfig c;
    c.mode = mode;
    c.seed = seed;
    c.epochs = 1;
    c.iters_per_epoch = 10000;
    c.sgld.steps = 10;
    // Full-scale step/lr leave a 2D energy nearly flat after 10k iterations.
    c.sgld.step_size = 0.003;
    c.reinit_prob = 0.5;
    c.learning_rate = 1e-3;
    c.gen_batch = 128;
    c.sample_every = 2500;
    c.sample_count = 512;
    return c;
}

const Dataset& eight_gaussians_train() {
    static const Dataset d = synth_2d("eight_gaussians", 8000, 1);
    return d;
}

const Dataset& eight_gaussians_heldout() {
    static const Dataset d = synth_2d("eight_gaussians", 4000, 1001);
    return d;
}

// Relative error with a floor so that exact zeros on both sides compare equal.
double grad_rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// ---------------------------------------------------------------------------

Outcome gradient_check() {
    Rng rng(0x9e3779b9);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int net = 0; net < 50; ++net) {
        ModelSpec spec;
        spec.mode = static_cast<Mode>(net % 3);
        spec.input_dim = 1 + rng.index(32);
        spec.hidden.assign(1 + rng.index(3), 0);
        for (auto& h : spec.hidden) h = 1 + rng.index(16);
        spec.num_classes = spec.mode == Mode::Uncond ? 0 : 2 + rng.index(4);
        spec.seed = rng.next_u64();
        EnergyModel model(spec);
        for (auto& p : model.parameters())
            for (double& v : p.tensor.mutable_values()) v += 0.1 * rng.normal();

        const std::size_t batch = 1 + rng.index(4);
        Tensor x = test::random_matrix(batch, spec.input_dim, rng).to_tensor();
        x.set_requires_grad(true);
        const Tensor we = Tensor::from({batch}, test::random_vector(batch, rng));
        std::optional<Tensor> wl;
        if (spec.num_classes) wl = Tensor::from({batch, spec.num_classes}, test::random_vector(batch * spec.num_classes, rng));
        const auto f = [&] {
            Tensor out = ops::sum(ops::mul(model.energy(x), we));
            if (wl) out = ops::add(out, ops::sum(ops::mul(model.logits(x), *wl)));
            return out;
        };
        model.zero_grad();
        x.zero_grad();
        f().backward();

        std::vector<std::pair<std::vector<double>, Tensor>> targets;
        for (auto& p : model.parameters())
            targets.emplace_back(std::vector<double>(p.tensor.grad().begin(), p.tensor.grad().end()), p.tensor);
        targets.emplace_back(std::vector<double>(x.grad().begin(), x.grad().end()), x);
        for (auto& [analytic, t] : targets) {
            const auto numeric = test::numeric_grad(t, [&] { return f().item(); }, 1e-5);
            for (std::size_t i = 0; i < numeric.size(); ++i) {
                worst = std::max(worst, grad_rel_error(analytic[i], numeric[i]));
                ++checked;
            }
        }
    }
    return {worst < 1e-4, fmt("50 nets, %zu partials, max rel err %.2e (< 1e-4)", checked, worst)};
}

Outcome init_fidelity() {
    const double mu[2] = {0.3, -0.2};
    const double sigma[4] = {0.5, 0.2, 0.2, 0.3};
    // Hand 2×2 Cholesky, independent of the library's factorization.
    const double l00 = std::sqrt(sigma[0]), l10 = sigma[2] / l00, l11 = std::sqrt(sigma[3] - l10 * l10);
    std::mt19937_64 eng(17);
    std::normal_distribution<double> z;
    const std::size_t n = 100000;
    Matrix draws(n, 2);
    for (std::size_t r = 0; r < n; ++r) {
        const double z0 = z(eng), z1 = z(eng);
        draws(r, 0) = mu[0] + l00 * z0;
        draws(r, 1) = mu[1] + l10 * z0 + l11 * z1;
    }
    const Matrix truth(2, 2, std::vector<double>(sigma, sigma + 4));
    const GaussianInit g = fit_gaussian(draws, 1e-4);
    const double fit_mu = std::max(std::abs(g.mean[0] - mu[0]), std::abs(g.mean[1] - mu[1]));
    const double fit_cov = frobenius(g.covariance(), truth);

    Rng rng(18);
    const Matrix s = sample_init(g, n, rng);
    std::vector<double> m;
    Matrix c;
    sample_moments(s, m, c);
    const double s_mu = std::max(std::abs(m[0] - mu[0]), std::abs(m[1] - mu[1]));
    const double s_cov = frobenius(c, truth);
    const bool pass = fit_mu < 0.01 && fit_cov < 0.02 && s_mu < 0.01 && s_cov < 0.02;
    return {pass, fmt("fit |dmu| %.4f cov %.4f; resample |dmu| %.4f cov %.4f (< 0.01 / 0.02)", fit_mu, fit_cov, s_mu,
                      s_cov)};
}

Outcome sgld_oracle() {
    const EnergyFunction quad = [](const Tensor& x) {
        return ops::scale(ops::row_sum(ops::square(x)), 0.5);
    };
    SgldConfig cfg;
    cfg.step_size = 0.5;
    cfg.noise_scale = 0.1;
    cfg.steps = 60;  // burn-in: (1−α)^60 ≈ 1e−18
    Rng rng(31);
    const std::size_t n = 20000;
    Matrix x0(n, 1);
    for (double& v : x0.data) v = rng.uniform(-1, 1);
    const Matrix xs = sgld_chain(quad, x0, cfg, rng);
    double mean = 0.0, var = 0.0;
    for (double v : xs.data) mean += v;
    mean /= n;
    for (double v : xs.data) var += (v - mean) * (v - mean);
    var /= n;
    const double target = 0.01 / (0.5 * 1.5);
    const double rel = std::abs(var - target) / target;

    SgldConfig quiet = cfg;
    quiet.noise_scale = 0.0;
    quiet.steps = 7;
    Matrix start(100, 1);
    for (double& v : start.data) v = rng.uniform(-5, 5);
    const Matrix end = sgld_chain(quad, start, quiet, rng);
    double worst = 0.0;
    for (std::size_t i = 0; i < start.rows; ++i)
        worst = std::max(worst, std::abs(end.data[i] - std::pow(0.5, 7) * start.data[i]));
    return {rel < 0.1 && worst < 1e-10,
            fmt("var %.5f vs %.5f (rel %.3f < 0.1) over %zu draws; closed-form err %.1e (< 1e-10)", var, target, rel,
                n, worst)};
}

Outcome algorithm_mechanics() {
    std::vector<std::string> notes;
    bool pass = true;

    // Detachment: the chain leaves no parameter gradient, and the loss gradient
    // equals the one computed from a constant copy of the negatives.
    ModelSpec spec;
    spec.hidden = {16, 16};
    spec.seed = 3;
    EnergyModel model(spec);
    Rng rng(41);
    const Matrix x0 = test::random_matrix(32, 2, rng, 0.5);
    const Matrix xp = test::random_matrix(32, 2, rng, 0.5);
    SgldConfig sc;
    sc.steps = 10;
    model.zero_grad();
    const Matrix neg = sgld_chain(model, x0, sc, rng);
    bool clean = true;
    for (const auto& p : model.parameters()) clean &= !p.tensor.has_grad();
    cd_l2_loss(model.energy(xp.to_tensor()), model.energy(neg.to_tensor()), 0.05).backward();
    std::vector<std::vector<double>> g1;
    for (const auto& p : model.parameters()) g1.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    model.zero_grad();
    const Matrix frozen = neg;
    cd_l2_loss(model.energy(xp.to_tensor()), model.energy(frozen.to_tensor()), 0.05).backward();
    std::vector<std::vector<double>> g2;
    for (const auto& p : model.parameters()) g2.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    const bool detached = clean && g1 == g2;
    pass &= detached;
    notes.push_back(std::string("detach ") + (detached ? "ok" : "FAILED"));

    // Reinitialization branch frequency.
    ReplayBuffer buffer(10000, 2, 0.05);
    buffer.push(test::random_matrix(100, 2, rng), rng);
    const InitDistribution p0 = UniformInit{Range{-1, 1}, 2};
    const std::size_t draws = 100000;
    const InitDraw d = draw_init(buffer, p0, draws, rng);
    const double sd = std::sqrt(draws * 0.05 * 0.95);
    const double z = (static_cast<double>(d.fresh_rows) - draws * 0.05) / sd;
    pass &= std::abs(z) < 5.0;
    notes.push_back(fmt("fresh rows %zu/%zu (z %.2f)", d.fresh_rows, draws, z));

    // Capacity.
    ReplayBuffer big(10000, 2, 0.05);
    for (int i = 0; i < 13; ++i) big.push(test::random_matrix(1000, 2, rng), rng);
    pass &= big.size() == 10000;
    notes.push_back(fmt("buffer size after 13000 pushes %zu", big.size()));

    const double cd = cd_l2_loss(Tensor::from({1}, {1.0}), Tensor::from({1}, {2.0}), 0.1).item();
    pass &= std::abs(cd + 0.5) < 1e-15;
    notes.push_back(fmt("cd_l2(1,2,0.1) = %.17g", cd));

    std::string detail;
    for (const auto& s : notes) detail += (detail.empty() ? "" : "; ") + s;
    return {pass, detail};
}

// ---------------------------------------------------------------------------

struct ToyRun {
    TrainState state;
    TrainConfig cfg;
    double seconds = 0.0;
};

ToyRun train_toy(const TrainConfig& cfg, const Dataset& data, const fs::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(dir);
    io::write_text(dir / "config.txt", cfg.to_text());
    TrainState s = train_loop(cfg, data, RunOptions{dir, {}});
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(s), cfg, sec};
}

struct Generation {
    double mmd = 0, reference = 0, mean_gap = 0, cov_gap = 0;
    bool moments_ok() const { return mean_gap < 0.1 && cov_gap < 0.3; }
    bool mmd_ok() const { return mmd < 3.0 * reference; }
};

Generation generation_report(const ToyRun& run, const Dataset& heldout, const fs::path& dir) {
    Rng rng = Rng::derive(run.cfg.seed, "acceptance-eval");
    EvalOptions opts;
    opts.sample_count = heldout.size() / 2;
    const EvalArtifacts a = evaluate(run.state, run.cfg, heldout, rng, opts);
    io::write_text(dir / "eval.csv", a.report.to_csv() + fmt("reference_mmd,%.17g\n", a.reference_mmd));
    io::write_text(dir / "histogram.txt", a.histogram.render());
    render_grid(a.generated, 40, 50, dir / "fresh_chain.txt");
    Generation g;
    g.mmd = a.report.mmd;
    g.reference = a.reference_mmd;
    for (double v : a.report.mean_gap) g.mean_gap = std::max(g.mean_gap, std::abs(v));
    g.cov_gap = a.report.cov_frobenius_gap;
    return g;
}

class Suite {
public:
    explicit Suite(fs::path out) : out_(std::move(out)) {}

    Outcome stability() {
        TrainConfig base = toy_config(Mode::Uncond, 0);
        base.iters_per_epoch = 5000;
        base.gen_batch = 64;
        base.sample_every = 0;
        StabilityGrid grid;
        grid.ks = {5};
        grid.inits = {InitMode::Informative, InitMode::Uniform};
        grid.seeds = {1, 2, 3, 4, 5};
        const auto t0 = std::chrono::steady_clock::now();
        const auto cells = bench_stability(base, eight_gaussians_train(), grid, worker_threads());
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fs::create_directories(out_ / "stability");
        io::write_text(out_ / "stability" / "stability.csv", stability_csv(cells));
        io::write_text(out_ / "stability" / "stability_summary.csv", stability_summary_csv(cells));

        std::map<InitMode, std::size_t> healthy;
        std::map<InitMode, std::vector<double>> gaps;
        for (const auto& c : cells) {
            healthy[c.init] += c.status == CellStatus::Healthy;
            gaps[c.init].push_back(c.status == CellStatus::Error ? INFINITY : c.final_gap);
        }
        const auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        const double mi = median(gaps[InitMode::Informative]), mu = median(gaps[InitMode::Uniform]);
        const std::size_t hi = healthy[InitMode::Informative], hu = healthy[InitMode::Uniform];
        const bool primary = hi >= 4 && hu <= 2;
        const bool fallback = hi >= 4 && hu > 2 && mi < mu;
        const bool in_time = sec < 1800;
        std::string detail = fmt("healthy informative %zu/5, uniform %zu/5; median final gap %.4g vs %.4g; %.0fs", hi,
                                 hu, mi, mu, sec);
        if (!primary && fallback) detail += " (uniform arm stayed healthy; fallback ordering applied)";
        return {(primary || fallback) && in_time, detail};
    }

    Outcome generation() {
        run_a_ = train_toy(toy_config(Mode::Uncond, 7), eight_gaussians_train(), out_ / "generation_a");
        const ToyRun& r = *run_a_;
        const Generation g = generation_report(r, eight_gaussians_heldout(), out_ / "generation_a");
        const bool in_time = r.seconds < 900;
        return {g.mmd_ok() && g.moments_ok() && in_time,
                fmt("mmd %.3g vs 3x reference %.3g (ratio %.2f); |mean gap| %.4f (< 0.1); cov gap %.4f (< 0.3); "
                    "%.0fs",
                    g.mmd, 3 * g.reference, g.mmd / g.reference, g.mean_gap, g.cov_gap, r.seconds)};
    }

    Outcome hybrid() {
        const Dataset train = synth_2d("two_moons", 8000, 2, 0.05);
        const Dataset test = synth_2d("two_moons", 4000, 1002, 0.05);
        const auto t0 = std::chrono::steady_clock::now();
        run_jem_ = train_toy(toy_config(Mode::MJEM, 11), train, out_ / "hybrid");
        const double acc = classifier_accuracy(run_jem_->state.model, test);
        const Generation g = generation_report(*run_jem_, test, out_ / "hybrid");

        TrainConfig ablation = toy_config(Mode::MJEM, 11);
        ablation.augment_gen_batch = true;
        std::string abl;
        try {
            const ToyRun a = train_toy(ablation, train, out_ / "hybrid_gen_augmented");
            const Generation ga = generation_report(a, test, out_ / "hybrid_gen_augmented");
            abl = fmt("ablation (gen batch augmented): acc %.4f, |mean gap| %.4f, cov gap %.4f, mmd ratio %.2f",
                      classifier_accuracy(a.state.model, test), ga.mean_gap, ga.cov_gap, ga.mmd / ga.reference);
        } catch (const DivergenceError& e) {
            abl = std::string("ablation diverged: ") + e.what();
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        io::write_text(out_ / "hybrid" / "ablation.txt", abl + "\n");
        const bool pass = acc >= 0.97 && g.moments_ok() && sec < 1200;
        return {pass, fmt("test acc %.4f (>= 0.97); |mean gap| %.4f; cov gap %.4f; mmd ratio %.2f; %.0fs incl. "
                          "ablation | ",
                          acc, g.mean_gap, g.cov_gap, g.mmd / g.reference, sec) +
                          abl};
    }

    Outcome regularization() {
        if (!run_jem_) return {false, "needs the hybrid run"};
        const auto tail_e2 = [](const std::vector<LossBreakdown>& h) {
            const std::size_t n = std::min<std::size_t>(1000, h.size());
            double s = 0.0;
            for (std::size_t i = h.size() - n; i < h.size(); ++i) s += 0.5 * (h[i].e_pos_sq_mean + h[i].e_neg_sq_mean);
            return s / static_cast<double>(n);
        };
        const double with_reg = tail_e2(run_jem_->state.history);
        TrainConfig off = toy_config(Mode::MJEM, 11);
        off.reg_coeff = 0.0;
        std::string logged;
        try {
            const ToyRun r = train_toy(off, synth_2d("two_moons", 8000, 2, 0.05), out_ / "hybrid_reg0");
            logged = fmt("reg 0: %.4g", tail_e2(r.state.history));
        } catch (const DivergenceError& e) {
            logged = std::string("reg 0 diverged: ") + e.what();
        }
        io::write_text(out_ / "hybrid_reg0.txt", logged + "\n");
        return {with_reg < 100.0, fmt("mean E^2 over last 1000 iters, reg 0.05: %.4g (< 100); ", with_reg) + logged};
    }

    Outcome diagnostics() {
        const auto t0 = std::chrono::steady_clock::now();
        bool pass = true;
        std::vector<std::string> notes;

        ModelSpec spec;
        spec.hidden = {8, 8};
        EnergyModel flat(spec);
        for (auto& p : flat.parameters())
            for (double& v : p.tensor.mutable_values()) v = 0.0;
        flat.energy_head()->bias.mutable_values()[0] = 0.75;
        Rng rng(91);
        const std::vector<HistogramGroup> groups{{"a", test::random_matrix(300, 2, rng), {}},
                                                 {"b", test::random_matrix(200, 2, rng, 3.0), {}}};
        const HistogramTable h = energy_histogram(flat, groups, 20);
        bool spike = true;
        for (const auto& row : h.rows) {
            const std::size_t nonzero = std::count_if(row.counts.begin(), row.counts.end(), [](auto c) { return c > 0; });
            const auto bin = static_cast<std::size_t>(std::find_if(row.counts.begin(), row.counts.end(),
                                                                   [](auto c) { return c > 0; }) -
                                                      row.counts.begin());
            spike &= nonzero == 1 && h.edges[bin] <= -0.75 && -0.75 <= h.edges[bin + 1];
        }
        pass &= spike;
        notes.push_back(std::string("spike ") + (spike ? "ok" : "FAILED"));

        Matrix planar(500, 6, 0.0);
        for (std::size_t r = 0; r < planar.rows; ++r) {
            planar(r, 1) = rng.normal();
            planar(r, 4) = 2.0 * rng.normal();
        }
        const PcaResult pca = pca_project(planar, 2);
        const double ev = pca.explained[0] + pca.explained[1];
        pass &= std::abs(ev - 1.0) < 1e-12;
        notes.push_back(fmt("planar explained %.15f", ev));

        if (!run_a_) {
            pass = false;
            notes.push_back("needs the generation run");
        } else {
            Matrix uni(4000, 2);
            for (double& v : uni.data) v = rng.uniform(-1, 1);
            const double pos = energy_stats(run_a_->state.model, eight_gaussians_heldout().samples).median;
            const double noise = energy_stats(run_a_->state.model, uni).median;
            const double contrast = (-pos) - (-noise);
            pass &= contrast >= 1.0;
            notes.push_back(fmt("median(-E(x+)) - median(-E(uniform)) = %.4f (>= 1.0)", contrast));
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        pass &= sec < 120;
        std::string detail;
        for (const auto& s : notes) detail += (detail.empty() ? "" : "; ") + s;
        return {pass, detail};
    }

    Outcome determinism() {
        if (!run_a_) return {false, "needs the generation run"};
        train_toy(toy_config(Mode::Uncond, 7), eight_gaussians_train(), out_ / "generation_b");
        const std::string a = slurp(out_ / "generation_a" / "metrics.csv");
        const std::string b = slurp(out_ / "generation_b" / "metrics.csv");
        const bool same = !a.empty() && a == b;
        return {same, fmt("metrics.csv %zu bytes, %s", a.size(), same ? "bitwise identical" : "DIFFER")};
    }

private:
    fs::path out_;
    std::optional<ToyRun> run_a_;
    std::optional<ToyRun> run_jem_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string out = "acceptance_artifacts";
    std::vector<int> only;
    app.add_option("--out", out, "artifact directory");
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(out);

    Suite suite(out);
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, gradient_check},
        {2, init_fidelity},
        {3, sgld_oracle},
        {4, algorithm_mechanics},
        {5, [&] { return suite.stability(); }},
        {6, [&] { return suite.generation(); }},
        {7, [&] { return suite.hybrid(); }},
        {8, [&] { return suite.regularization(); }},
        {9, [&] { return suite.diagnostics(); }},
        {10, [&] { return suite.determinism(); }},
    };
    const std::set<int> wanted(only.begin(), only.end());
    // 9 and 10 reuse the model trained for 6; 8 reuses 7.
    std::set<int> needed = wanted;
    if (wanted.count(9) || wanted.count(10)) needed.insert(6);
    if (wanted.count(8)) needed.insert(7);

    std::ostringstream report;
    int failures = 0;
    for (const auto& [id, run] : criteria) {
        if (!needed.empty() && !needed.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!wanted.empty() && !wanted.count(id)) continue;
        const std::string line = fmt("criterion %2d: %s  ", id, o.pass ? "PASS" : "FAIL") + o.detail +
                                 fmt("  [%.1fs]", sec);
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        report << line << '\n';
        failures += !o.pass;
    }
    io::write_text(fs::path(out) / "acceptance_report.txt", report.str());
    return failures == 0 ? 0 : 1;
}
