#include "msnet/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "msnet/error.hpp"

namespace msnet {

void RunConfig::validate() const {
    model.validate();
    loss.validate();
    if (!(momentum >= 0.0 && momentum < 1.0))
        fail(ErrorCategory::config, "momentum must be in [0, 1), got " + std::to_string(momentum));
    if (!(weight_decay >= 0.0)) fail(ErrorCategory::config, "weight_decay must be >= 0");
    if (!(lr_backbone_max > 0.0 && lr_head_max > 0.0))
        fail(ErrorCategory::config, "learning rates must be > 0");
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
        fail(ErrorCategory::config,
             "warmup_fraction must be in (0, 1), got " + std::to_string(warmup_fraction));
    if (epochs <= 0) fail(ErrorCategory::config, "epochs must be positive");
    if (batch_size <= 0) fail(ErrorCategory::config, "batch_size must be positive");
    if (!(threshold > 0.0 && threshold < 1.0))
        fail(ErrorCategory::config, "threshold must be in (0, 1)");
    const double rsum = ratio_train + ratio_val + ratio_test;
    if (std::fabs(rsum - 1.0) > 1e-9)
        fail(ErrorCategory::config, "split ratios must sum to 1, got " + std::to_string(rsum));
    if (gen_n <= 0) fail(ErrorCategory::config, "gen_n must be positive");
}

void RunConfig::finalize() {
    if (!pool_k_explicit) loss.pool_k = pool_k_for_input(model.input_size);
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& value, const std::string& key, const std::string& where) {
    std::istringstream is(value);
    T out{};
    is >> out;
    if (is.fail() || !(is >> std::ws).eof())
        fail(ErrorCategory::parse, where + ": invalid value '" + value + "' for " + key);
    return out;
}

bool parse_bool(const std::string& value, const std::string& key, const std::string& where) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    fail(ErrorCategory::parse, where + ": invalid boolean '" + value + "' for " + key);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        const std::string& where) {
    if (key == "input_size") cfg.model.input_size = parse_number<int>(value, key, where);
    else if (key == "channels") cfg.model.channels = parse_number<int>(value, key, where);
    else if (key == "pyramid_depth") cfg.model.pyramid_depth = parse_number<int>(value, key, where);
    else if (key == "fusion_mode") cfg.model.fusion_mode = fusion_mode_from_string(value);
    else if (key == "lossnet_enabled") cfg.model.lossnet_enabled = parse_bool(value, key, where);
    else if (key == "model_seed") cfg.model.seed = parse_number<std::uint64_t>(value, key, where);
    else if (key == "weight_gain") cfg.loss.weight_gain = parse_number<double>(value, key, where);
    else if (key == "pool_k") {
        cfg.loss.pool_k = parse_number<int>(value, key, where);
        cfg.pool_k_explicit = true;
    } else if (key == "lossnet_seed") cfg.loss.lossnet_seed = parse_number<std::uint64_t>(value, key, where);
    else if (key == "eps") cfg.loss.eps = parse_number<double>(value, key, where);
    else if (key == "momentum") cfg.momentum = parse_number<double>(value, key, where);
    else if (key == "weight_decay") cfg.weight_decay = parse_number<double>(value, key, where);
    else if (key == "lr_backbone_max") cfg.lr_backbone_max = parse_number<double>(value, key, where);
    else if (key == "lr_head_max") cfg.lr_head_max = parse_number<double>(value, key, where);
    else if (key == "clip_norm") cfg.clip_norm = parse_number<double>(value, key, where);
    else if (key == "epochs") cfg.epochs = parse_number<int>(value, key, where);
    else if (key == "batch_size") cfg.batch_size = parse_number<int>(value, key, where);
    else if (key == "warmup_fraction") cfg.warmup_fraction = parse_number<double>(value, key, where);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, key, where);
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "threshold") cfg.threshold = parse_number<double>(value, key, where);
    else if (key == "gen_n") cfg.gen_n = parse_number<int>(value, key, where);
    else if (key == "gen_difficulty") cfg.gen_difficulty = difficulty_from_string(value);
    else if (key == "ratio_train") cfg.ratio_train = parse_number<double>(value, key, where);
    else if (key == "ratio_val") cfg.ratio_val = parse_number<double>(value, key, where);
    else if (key == "ratio_test") cfg.ratio_test = parse_number<double>(value, key, where);
    else fail(ErrorCategory::parse, where + ": unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open config file " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (eq == std::string::npos)
            fail(ErrorCategory::parse, where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorCategory::parse, where + ": empty key");
        apply_config_entry(cfg, key, value, where);
    }
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    auto real = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "input_size = " << cfg.model.input_size << "\n";
    os << "channels = " << cfg.model.channels << "\n";
    os << "pyramid_depth = " << cfg.model.pyramid_depth << "\n";
    os << "fusion_mode = " << to_string(cfg.model.fusion_mode) << "\n";
    os << "lossnet_enabled = " << (cfg.model.lossnet_enabled ? "true" : "false") << "\n";
    os << "model_seed = " << cfg.model.seed << "\n";
    os << "weight_gain = " << real(cfg.loss.weight_gain) << "\n";
    os << "pool_k = " << cfg.loss.pool_k << "\n";
    os << "lossnet_seed = " << cfg.loss.lossnet_seed << "\n";
    os << "eps = " << real(cfg.loss.eps) << "\n";
    os << "momentum = " << real(cfg.momentum) << "\n";
    os << "weight_decay = " << real(cfg.weight_decay) << "\n";
    os << "lr_backbone_max = " << real(cfg.lr_backbone_max) << "\n";
    os << "lr_head_max = " << real(cfg.lr_head_max) << "\n";
    os << "clip_norm = " << real(cfg.clip_norm) << "\n";
    os << "epochs = " << cfg.epochs << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "warmup_fraction = " << real(cfg.warmup_fraction) << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "data_dir = " << cfg.data_dir << "\n";
    os << "threshold = " << real(cfg.threshold) << "\n";
    os << "gen_n = " << cfg.gen_n << "\n";
    os << "gen_difficulty = " << to_string(cfg.gen_difficulty) << "\n";
    os << "ratio_train = " << real(cfg.ratio_train) << "\n";
    os << "ratio_val = " << real(cfg.ratio_val) << "\n";
    os << "ratio_test = " << real(cfg.ratio_test) << "\n";
    return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace msnet
