#include "scsm/runconfig.hpp"

#include <fstream>
#include <sstream>

namespace scsm::cli {

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": invalid integer '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": invalid number '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config key " + key + ": invalid boolean '" + v + "'");
}

// "0,0;0,1;1,0" -> [(0,0),(0,1),(1,0)]
dct::FrequencyList to_freqs(const std::string& key, const std::string& v) {
    dct::FrequencyList out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ';')) {
        const auto comma = item.find(',');
        if (comma == std::string::npos)
            throw ConfigError("config key " + key + ": expected h,w pairs, got '" + item + "'");
        out.emplace_back(to_int(key, item.substr(0, comma)), to_int(key, item.substr(comma + 1)));
    }
    return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line.erase(0, start);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto& m = cfg.model;
        if (key == "input_h") m.input_h = to_int(key, val);
        else if (key == "in_channels") m.in_channels = to_int(key, val);
        else if (key == "input_w") m.input_w = to_int(key, val);
        else if (key == "stage1") m.stage1 = to_int(key, val);
        else if (key == "stage2") m.stage2 = to_int(key, val);
        else if (key == "stage3") m.stage3 = to_int(key, val);
        else if (key == "chat") m.chat = to_int(key, val);
        else if (key == "attn_channels") m.attn_channels = to_int(key, val);
        else if (key == "num_classes") m.num_classes = to_int(key, val);
        else if (key == "block_h") m.block_h = to_int(key, val);
        else if (key == "block_w") m.block_w = to_int(key, val);
        else if (key == "num_freq") m.num_freq = to_int(key, val);
        else if (key == "freq_policy") m.freq_policy = val;
        else if (key == "explicit_freqs") m.explicit_freqs = to_freqs(key, val);
        else if (key == "gate_reduction") m.gate_reduction = to_int(key, val);
        else if (key == "coeff_o") m.coeff_o = to_double(key, val);
        else if (key == "coeff_d") m.coeff_d = to_double(key, val);
        else if (key == "coeff_a") m.coeff_a = to_double(key, val);
        else if (key == "lr") m.lr = to_double(key, val);
        else if (key == "weight_decay") m.weight_decay = to_double(key, val);
        else if (key == "poly_power") m.poly_power = to_double(key, val);
        else if (key == "momentum") m.momentum = to_double(key, val);
        else if (key == "max_iter") m.max_iter = to_int(key, val);
        else if (key == "batch_size") m.batch_size = to_int(key, val);
        else if (key == "seed") m.seed = static_cast<std::uint64_t>(to_int(key, val));
        else if (key == "use_rope") m.use_rope = to_bool(key, val);
        else if (key == "use_gate") m.use_gate = to_bool(key, val);
        else if (key == "use_smg") m.use_smg = to_bool(key, val);
        else if (key == "rope_identical_angles") m.rope_identical_angles = to_bool(key, val);
        else if (key == "train_samples") cfg.train_samples = to_int(key, val);
        else if (key == "val_samples") cfg.val_samples = to_int(key, val);
        else if (key == "out_dir") cfg.out_dir = val;
        else throw ConfigError("unknown config key: " + key);
    }
    cfg.model.validate();
    if (cfg.train_samples <= 0 || cfg.val_samples <= 0)
        throw ConfigError("train_samples and val_samples must be positive");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return parse_run_config(os.str());
}

std::string run_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << cfg.model.canonical_text();
    os << "train_samples=" << cfg.train_samples << "\nval_samples=" << cfg.val_samples
       << "\nout_dir=" << cfg.out_dir << "\n";
    return os.str();
}

}  // namespace scsm::cli
