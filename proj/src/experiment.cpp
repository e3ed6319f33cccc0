#include "mebm/experiment.hpp"

#include "mebm/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace mebm {
namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Matrix rows_of(const Matrix& m, std::size_t begin, std::size_t count) {
    Matrix out(count, m.cols);
    std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(begin * m.cols),
              m.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * m.cols), out.data.begin());
    return out;
}

double window_gap(const std::vector<LossBreakdown>& history, std::size_t window) {
    if (history.empty()) return 0.0;
    const std::size_t n = std::min(window, history.size());
    double s = 0.0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) s += std::abs(history[i].energy_gap());
    return s / static_cast<double>(n);
}

StabilityCell run_cell(const TrainConfig& base, const Dataset& data, std::size_t k, InitMode init,
                       std::uint64_t seed, std::size_t max_iters) {
    StabilityCell cell;
    cell.k = k;
    cell.init = init;
    cell.seed = seed;
    TrainConfig cfg = base;
    cfg.sgld.steps = k;
    cfg.init = init;
    cfg.seed = seed;
    if (max_iters > 0) cfg.max_iters = max_iters;
    std::vector<LossBreakdown> seen;
    try {
        TrainState state = init_state(cfg, data);
        try {
            run_training(state, cfg, data, cfg.total_iterations());
        } catch (const DivergenceError& e) {
            cell.status = CellStatus::Diverged;
            cell.diverged_at = e.iteration();
            cell.message = e.what();
        }
        cell.iterations = state.iteration;
        cell.final_gap = cell.status == CellStatus::Diverged ? std::numeric_limits<double>::infinity()
                                                             : window_gap(state.history, cfg.divergence_window);
    } catch (const std::exception& e) {
        cell.status = CellStatus::Error;
        cell.final_gap = std::numeric_limits<double>::quiet_NaN();
        cell.message = e.what();
    }
    return cell;
}

std::string csv_field(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

}  // namespace

Matrix fresh_chain_samples(const TrainState& state, const TrainConfig& cfg, std::size_t count, Rng& rng,
                           std::size_t steps) {
    const Matrix x0 = sample_init(state.p0, count, rng, state.init_clamp);
    if (count == 0) return x0;
    SgldConfig sc = cfg.sgld;
    sc.clamp_range = state.sgld_clamp;
    if (steps > 0) sc.steps = steps;
    return sgld_chain(state.model, x0, sc, rng);
}

EvalArtifacts evaluate(const TrainState& state, const TrainConfig& cfg, const Dataset& heldout, Rng& rng,
                       const EvalOptions& options) {
    const std::size_t n = options.sample_count;
    if (n < 2) throw ConfigError("evaluate: sample_count must be at least 2");
    if (heldout.size() < 2 * n)
        throw DataError("evaluate: held-out set has " + std::to_string(heldout.size()) + " rows, need " +
                        std::to_string(2 * n));
    if (heldout.dim() != state.model.input_dim()) throw DataError("evaluate: held-out dimension mismatch");

    EvalArtifacts out;
    const Matrix x0 = sample_init(state.p0, n, rng, state.init_clamp);
    SgldConfig sc = cfg.sgld;
    sc.clamp_range = state.sgld_clamp;
    out.generated = sgld_chain(state.model, x0, sc, rng);

    const Matrix real_a = rows_of(heldout.samples, 0, n);
    const Matrix real_b = rows_of(heldout.samples, n, n);
    out.report.bandwidth = median_bandwidth(real_a, real_b);
    out.report.mmd = mmd(out.generated, real_a, out.report.bandwidth, options.estimator);
    out.reference_mmd = mmd(real_a, real_b, out.report.bandwidth, options.estimator);
    const MomentGap gap = moment_gap(out.generated, real_a);
    out.report.mean_gap = gap.mean_gap;
    out.report.cov_frobenius_gap = gap.cov_frobenius_gap;

    Matrix uniform(n, heldout.dim());
    for (double& v : uniform.data) v = rng.uniform(heldout.range.lo, heldout.range.hi);

    std::vector<std::int32_t> labels_a;
    if (heldout.labeled()) labels_a.assign(heldout.labels.begin(), heldout.labels.begin() + static_cast<std::ptrdiff_t>(n));
    const std::vector<HistogramGroup> groups{
        {"x+", real_a, labels_a}, {"x-", out.generated, {}}, {"x0", x0, {}}, {"uniform", uniform, {}}};
    for (const auto& g : groups) out.report.energy[g.name] = energy_stats(state.model, g.samples);
    out.histogram = energy_histogram(state.model, groups, options.histogram_bins);
    out.manifold = manifold_analysis(state.model, real_a, out.generated, x0);
    if (state.model.mode() != Mode::Uncond && heldout.labeled())
        out.report.accuracy = classifier_accuracy(state.model, heldout);
    return out;
}

std::string_view to_string(CellStatus status) {
    switch (status) {
        case CellStatus::Healthy: return "healthy";
        case CellStatus::Diverged: return "diverged";
        case CellStatus::Error: return "error";
    }
    return "?";
}

std::vector<StabilityCell> bench_stability(const TrainConfig& base, const Dataset& data, const StabilityGrid& grid,
                                           std::size_t threads) {
    if (grid.ks.empty() || grid.inits.empty() || grid.seeds.empty())
        throw ConfigError("bench_stability: K, init and seed lists must be nonempty");
    struct Job {
        std::size_t k;
        InitMode init;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t k : grid.ks)
        for (InitMode init : grid.inits)
            for (std::uint64_t seed : grid.seeds) jobs.push_back({k, init, seed});

    std::vector<StabilityCell> cells(jobs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++)
            cells[i] = run_cell(base, data, jobs[i].k, jobs[i].init, jobs[i].seed, grid.max_iters);
    };
    const std::size_t n = std::clamp<std::size_t>(threads, 1, jobs.size());
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    return cells;
}

std::string stability_csv(const std::vector<StabilityCell>& cells) {
    std::ostringstream os;
    os << "k,init,seed,status,iterations,diverged_at,final_gap,message\n";
    for (const auto& c : cells)
        os << c.k << ',' << to_string(c.init) << ',' << c.seed << ',' << to_string(c.status) << ',' << c.iterations
           << ',' << c.diverged_at << ',' << fmt(c.final_gap) << ',' << csv_field(c.message) << '\n';
    return os.str();
}

std::string stability_summary_csv(const std::vector<StabilityCell>& cells) {
    std::map<std::pair<std::size_t, std::string>, std::vector<const StabilityCell*>> by;
    for (const auto& c : cells) by[{c.k, std::string(to_string(c.init))}].push_back(&c);
    std::ostringstream os;
    os << "k,init,runs,healthy,diverged,errors,divergence_rate,median_final_gap\n";
    for (const auto& [key, group] : by) {
        std::size_t healthy = 0, diverged = 0, errors = 0;
        std::vector<double> gaps;
        for (const auto* c : group) {
            healthy += c->status == CellStatus::Healthy;
            diverged += c->status == CellStatus::Diverged;
            errors += c->status == CellStatus::Error;
            if (c->status != CellStatus::Error) gaps.push_back(c->final_gap);
        }
        double median = std::numeric_limits<double>::quiet_NaN();
        if (!gaps.empty()) {
            std::sort(gaps.begin(), gaps.end());
            const std::size_t m = gaps.size() / 2;
            median = gaps.size() % 2 ? gaps[m] : 0.5 * (gaps[m - 1] + gaps[m]);
        }
        const double rate = static_cast<double>(diverged) / static_cast<double>(group.size());
        os << key.first << ',' << key.second << ',' << group.size() << ',' << healthy << ',' << diverged << ','
           << errors << ',' << fmt(rate) << ',' << fmt(median) << '\n';
    }
    return os.str();
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("EBM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace mebm
