#pragma once

#include "scsm/metrics.hpp"
#include "scsm/model.hpp"
#include "scsm/runconfig.hpp"

#include <ostream>
#include <vector>

namespace scsm::train {

struct TrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    metrics::Summary val_summary{0, 0, 0};
};

// Deterministic synthetic splits derived from the run seed.
std::vector<data::SceneSample> train_split(const cli::RunConfig& cfg);
std::vector<data::SceneSample> val_split(const cli::RunConfig& cfg);

// Runs the configured number of SGD iterations. Batches cycle through the
// training split in a seeded shuffled order. Writes
// `iter,loss_o,loss_d,loss_a,total` lines when loss_csv is given.
TrainResult run_training(model::ScsmModel& net, const cli::RunConfig& cfg,
                         const std::vector<data::SceneSample>& train_set,
                         const std::vector<data::SceneSample>& val_set,
                         std::ostream* loss_csv = nullptr);

metrics::Summary evaluate(model::ScsmModel& net, const std::vector<data::SceneSample>& samples,
                          metrics::ConfusionMatrix* cm_out = nullptr);

}  // namespace scsm::train
