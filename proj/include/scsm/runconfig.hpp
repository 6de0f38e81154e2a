#pragma once

#include "scsm/model.hpp"

#include <string>

namespace scsm::cli {

// Textual key=value run configuration. Unknown keys are rejected; every key
// has a default baked into ScsmConfig / the fields below.
struct RunConfig {
    model::ScsmConfig model;
    int train_samples = 400;
    int val_samples = 100;
    std::string out_dir = "out";

    static RunConfig defaults() { return RunConfig{}; }
};

// Parses `key=value` lines ('#' comments and blank lines allowed).
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::string run_config_text(const RunConfig& cfg);

}  // namespace scsm::cli
