#include "scsm/train.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace scsm::train {

std::vector<data::SceneSample> train_split(const cli::RunConfig& cfg) {
    return data::generate_dataset(cfg.model.seed * 7919ULL + 1, cfg.train_samples,
                                  cfg.model.input_h, cfg.model.input_w);
}

std::vector<data::SceneSample> val_split(const cli::RunConfig& cfg) {
    return data::generate_dataset(cfg.model.seed * 7919ULL + 500000ULL, cfg.val_samples,
                                  cfg.model.input_h, cfg.model.input_w);
}

TrainResult run_training(model::ScsmModel& net, const cli::RunConfig& cfg,
                         const std::vector<data::SceneSample>& train_set,
                         const std::vector<data::SceneSample>& val_set,
                         std::ostream* loss_csv) {
    if (train_set.empty()) throw ConfigError("run_training: empty training split");
    std::mt19937_64 rng(cfg.model.seed + 17);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    TrainResult res;
    if (loss_csv) *loss_csv << "iter,loss_o,loss_d,loss_a,total\n";
    for (int iter = 0; iter < cfg.model.max_iter; ++iter) {
        std::vector<const data::SceneSample*> batch;
        for (int b = 0; b < cfg.model.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(&train_set[order[cursor++]]);
        }
        model::LossBundle lb = net.train_step(batch, iter);
        if (iter == 0) res.initial_loss = lb.total;
        res.final_loss = lb.total;
        if (loss_csv)
            *loss_csv << iter << "," << lb.l_o << "," << lb.l_d << "," << lb.l_a << ","
                      << lb.total << "\n";
    }
    if (!val_set.empty()) res.val_summary = evaluate(net, val_set);
    return res;
}

metrics::Summary evaluate(model::ScsmModel& net, const std::vector<data::SceneSample>& samples,
                          metrics::ConfusionMatrix* cm_out) {
    metrics::ConfusionMatrix cm(net.config().num_classes);
    for (const auto& s : samples) cm.accumulate(net.predict(s.image), s.mask);
    if (cm_out) *cm_out = cm;
    return metrics::summary(cm);
}

}  // namespace scsm::train
