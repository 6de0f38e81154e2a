#pragma once

#include "scsm/data.hpp"
#include "scsm/dct2d.hpp"
#include "scsm/rope2d.hpp"
#include "scsm/sca.hpp"
#include "scsm/smg.hpp"
#include "scsm/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace scsm::model {

struct ScsmConfig {
    int input_h = 64, input_w = 64;
    int in_channels = 3;
    int stage1 = 16, stage2 = 32, stage3 = 64;  // backbone plan, stride 2 each
    int chat = 64;            // decoder feature channels (stage 4, stride 1)
    int attn_channels = 64;   // C; must be even and divisible by num_freq
    int num_classes = 4;
    int block_h = 2, block_w = 2;
    int num_freq = 16;
    std::string freq_policy = "zigzag-low";  // or "explicit"
    dct::FrequencyList explicit_freqs;
    int gate_reduction = 4;
    double coeff_o = 1.0, coeff_d = 0.8, coeff_a = 0.4;
    double lr = 0.01, weight_decay = 1e-4, poly_power = 0.9, momentum = 0.0;
    int max_iter = 2000;
    int batch_size = 4;
    std::uint64_t seed = 2;
    // Ablation switches.
    bool use_rope = true;
    bool use_gate = true;
    bool use_smg = true;
    bool rope_identical_angles = false;

    void validate() const;
    std::string canonical_text() const;  // stable key=value dump for the digest
};

struct LossBundle {
    double l_o = 0, l_d = 0, l_a = 0, total = 0;
    Var total_var;
};

struct ForwardResult {
    Var logits_o, logits_d, logits_a;  // all {K, H, W} at input resolution
    Var features;                      // R, {Chat, H/8, W/8}
    std::vector<sca::ScaBlockResult> attention;  // per-block diagnostics
};

// Cross-entropy over per-pixel probability vectors against an index mask.
// pred is {K,H,W} and must be spatially normalized over K.
Var cross_entropy(const Var& pred_probs, const smg::ArgmaxMask& truth);

class ScsmModel {
public:
    explicit ScsmModel(ScsmConfig cfg);

    ForwardResult forward(const Tensor& image, bool keep_attention = false);
    LossBundle total_loss(const ForwardResult& fwd, const smg::ArgmaxMask& truth);
    LossBundle train_step(const std::vector<const data::SceneSample*>& batch, int iter);
    smg::ArgmaxMask predict(const Tensor& image);

    double learning_rate(int iter) const;

    const ScsmConfig& config() const { return cfg_; }
    std::map<std::string, Tensor> state() const;
    void load_state(const std::map<std::string, Tensor>& state);

    const std::map<std::string, Var>& params() const { return params_; }

private:
    Var param(const std::string& name) const;
    void sgd_update(double lr);

    ScsmConfig cfg_;
    std::map<std::string, Var> params_;
    dct::DctBasis basis_;
    dct::FrequencyList freqs_;
    rope::RopeConfig rope_cfg_;
};

// Instrumented MAC counts of the context-aggregation stage (SMG + SCA) and
// of dense global attention over the same feature map, for the efficiency
// comparison. Both run real ops on synthetic features and read the counter.
std::int64_t head_mac_count(int feat_h, int feat_w, int chat, int c, int k, int block_h,
                            int block_w, int num_freq);
std::int64_t vanilla_mac_count(int feat_h, int feat_w, int chat, int c);

}  // namespace scsm::model
