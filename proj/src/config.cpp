#include "mebm/config.hpp"

#include "mebm/binary_io.hpp"
#include "mebm/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mebm {
namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t to_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                          std::string(v) + "'");
    return out;
}

double to_real(std::string_view key, std::string_view v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(std::string(v), &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(v) + "'");
}

}  // namespace

std::string_view to_string(InitMode mode) {
    switch (mode) {
        case InitMode::Informative: return "informative";
        case InitMode::Uniform: return "uniform";
        case InitMode::Mixture: return "mixture";
    }
    return "?";
}

InitMode parse_init_mode(std::string_view text) {
    if (text == "informative") return InitMode::Informative;
    if (text == "uniform") return InitMode::Uniform;
    if (text == "mixture") return InitMode::Mixture;
    throw ConfigError("unknown init mode '" + std::string(text) + "' (informative|uniform|mixture)");
}

std::size_t TrainConfig::total_iterations() const {
    const std::size_t full = epochs * iters_per_epoch;
    return max_iters > 0 ? std::min(full, max_iters) : full;
}

void TrainConfig::validate() const {
    if (iters_per_epoch == 0) throw ConfigError("iters_per_epoch must be positive");
    if (clf_batch == 0 || gen_batch == 0) throw ConfigError("batch sizes must be positive");
    if (buffer_capacity == 0) throw ConfigError("buffer_capacity must be positive");
    if (!(reinit_prob >= 0.0 && reinit_prob <= 1.0)) throw ConfigError("reinit_prob must lie in [0,1]");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
    if (!(reg_coeff >= 0.0)) throw ConfigError("reg_coeff must be >= 0");
    if (!(inject_sigma >= 0.0)) throw ConfigError("inject_sigma must be >= 0");
    if (!(eps_reg > 0.0)) throw ConfigError("eps_reg must be > 0");
    if (divergence_window == 0) throw ConfigError("divergence_window must be >= 1");
    if (hidden_layers == 0) throw ConfigError("hidden_layers must be >= 1");
    sgld.validate();
}

void apply_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
    if (key == "epochs") cfg.epochs = to_size(key, value);
    else if (key == "iters_per_epoch") cfg.iters_per_epoch = to_size(key, value);
    else if (key == "max_iters") cfg.max_iters = to_size(key, value);
    else if (key == "clf_batch") cfg.clf_batch = to_size(key, value);
    else if (key == "gen_batch") cfg.gen_batch = to_size(key, value);
    else if (key == "learning_rate") cfg.learning_rate = to_real(key, value);
    else if (key == "momentum") cfg.momentum = to_real(key, value);
    else if (key == "sgld_steps") cfg.sgld.steps = to_size(key, value);
    else if (key == "sgld_step_size") cfg.sgld.step_size = to_real(key, value);
    else if (key == "sgld_noise") cfg.sgld.noise_scale = to_real(key, value);
    else if (key == "sgld_clamp") {
        if (value == "auto") {
            cfg.sgld_clamp_auto = true;
            cfg.sgld.clamp_range.reset();
        } else if (value == "none") {
            cfg.sgld_clamp_auto = false;
            cfg.sgld.clamp_range.reset();
        } else {
            const auto comma = value.find(',');
            if (comma == std::string_view::npos)
                throw ConfigError("config key 'sgld_clamp': expected auto, none or lo,hi");
            cfg.sgld_clamp_auto = false;
            cfg.sgld.clamp_range = Range{to_real(key, trim(value.substr(0, comma))),
                                         to_real(key, trim(value.substr(comma + 1)))};
        }
    }
    else if (key == "buffer_capacity") cfg.buffer_capacity = to_size(key, value);
    else if (key == "reinit_prob") cfg.reinit_prob = to_real(key, value);
    else if (key == "reg_coeff") cfg.reg_coeff = to_real(key, value);
    else if (key == "inject_sigma") cfg.inject_sigma = to_real(key, value);
    else if (key == "mode") cfg.mode = parse_mode(value);
    else if (key == "init") cfg.init = parse_init_mode(value);
    else if (key == "eps_reg") cfg.eps_reg = to_real(key, value);
    else if (key == "init_clamp") cfg.init_clamp = to_bool(key, value);
    else if (key == "hidden_layers") cfg.hidden_layers = to_size(key, value);
    else if (key == "hidden_width") cfg.hidden_width = to_size(key, value);
    else if (key == "leaky_slope") cfg.leaky_slope = to_real(key, value);
    else if (key == "augment") cfg.augment = to_bool(key, value);
    else if (key == "augment_gen_batch") cfg.augment_gen_batch = to_bool(key, value);
    else if (key == "jitter_sigma") cfg.jitter_sigma = to_real(key, value);
    else if (key == "seed") cfg.seed = to_size(key, value);
    else if (key == "divergence_threshold") cfg.divergence_threshold = to_real(key, value);
    else if (key == "divergence_window") cfg.divergence_window = to_size(key, value);
    else if (key == "sample_every") cfg.sample_every = to_size(key, value);
    else if (key == "sample_count") cfg.sample_count = to_size(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text) {
    TrainConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os << "epochs=" << epochs << '\n'
       << "iters_per_epoch=" << iters_per_epoch << '\n'
       << "max_iters=" << max_iters << '\n'
       << "clf_batch=" << clf_batch << '\n'
       << "gen_batch=" << gen_batch << '\n'
       << "learning_rate=" << num(learning_rate) << '\n'
       << "momentum=" << num(momentum) << '\n'
       << "sgld_steps=" << sgld.steps << '\n'
       << "sgld_step_size=" << num(sgld.step_size) << '\n'
       << "sgld_noise=" << num(sgld.noise_scale) << '\n';
    if (sgld_clamp_auto) os << "sgld_clamp=auto\n";
    else if (!sgld.clamp_range) os << "sgld_clamp=none\n";
    else os << "sgld_clamp=" << num(sgld.clamp_range->lo) << ',' << num(sgld.clamp_range->hi) << '\n';
    os << "buffer_capacity=" << buffer_capacity << '\n'
       << "reinit_prob=" << num(reinit_prob) << '\n'
       << "reg_coeff=" << num(reg_coeff) << '\n'
       << "inject_sigma=" << num(inject_sigma) << '\n'
       << "mode=" << to_string(mode) << '\n'
       << "init=" << to_string(init) << '\n'
       << "eps_reg=" << num(eps_reg) << '\n'
       << "init_clamp=" << (init_clamp ? "true" : "false") << '\n'
       << "hidden_layers=" << hidden_layers << '\n'
       << "hidden_width=" << hidden_width << '\n'
       << "leaky_slope=" << num(leaky_slope) << '\n'
       << "augment=" << (augment ? "true" : "false") << '\n'
       << "augment_gen_batch=" << (augment_gen_batch ? "true" : "false") << '\n'
       << "jitter_sigma=" << num(jitter_sigma) << '\n'
       << "seed=" << seed << '\n'
       << "divergence_threshold=" << num(divergence_threshold) << '\n'
       << "divergence_window=" << divergence_window << '\n'
       << "sample_every=" << sample_every << '\n'
       << "sample_count=" << sample_count << '\n';
    return os.str();
}

}  // namespace mebm
