#pragma once

#include "scsm/dct2d.hpp"
#include "scsm/rope2d.hpp"
#include "scsm/smg.hpp"
#include "scsm/tensor.hpp"

#include <optional>
#include <vector>

namespace scsm::sca {

// q/k/v projection weights, shared across blocks. All {C_in, C}.
struct Projections {
    Var w_q, w_k, w_v;
};

// Scaled dot-product attention over one token matrix, q = k = v = x W.
// Baseline for the reduction checks.
Var vanilla_attention(const Var& tokens, const Projections& proj);

// Affinity t[m,n] = <gate . rope(q_m), rope(k_n)> / sqrt(C).
// gate may be empty (treated as all-ones), as may the rope config.
Var sca_affinity(const Var& q, const Var& k, const rope::PositionGrid& pos,
                 const std::optional<Var>& gate, const std::optional<rope::RopeConfig>& cfg);

struct ScaOptions {
    bool use_rope = true;
    bool use_gate = true;
};

struct ScaBlockResult {
    Var output;                 // {n, C}
    Var affinity;               // {n, n} pre-softmax
    Var weights;                // {n, n} softmax rows
};

// One attention block: q from the pixel features, k from the local semantic
// mask, v from the global semantic mask, with per-block scene gate and
// rotary positions.
ScaBlockResult sca_block(const Var& r_l_tokens, const Var& s_l_tokens, const Var& s_g_tokens,
                         const rope::PositionGrid& pos, const Projections& proj,
                         const dct::GateParams& gate_params, const dct::FrequencyList& freqs,
                         const dct::DctBasis& basis, const rope::RopeConfig& cfg,
                         int block_h, int block_w, const ScaOptions& opts = {});

// Runs sca_block over every block of the layout and restores the map.
// r_l/s_l/s_g are {C_in,h,w} feature blocks in layout order.
Var sca_forward(const std::vector<Var>& r_blocks, const std::vector<Var>& s_l_blocks,
                const std::vector<Var>& s_g_blocks, const smg::BlockLayout& layout,
                const Projections& proj, const dct::GateParams& gate_params,
                const dct::FrequencyList& freqs, const dct::DctBasis& basis,
                const rope::RopeConfig& cfg, const ScaOptions& opts = {},
                std::vector<ScaBlockResult>* diag = nullptr);

// Channel concat of the restored attention map with the backbone features,
// then a 3x3 projection back to the feature channel count.
Var fuse_output(const Var& r_a, const Var& r, const Var& kernel, const Var& bias);

// Flattens a {C,h,w} block to {h*w, C} row-major tokens (and back).
Var to_tokens(const Var& block);
Var from_tokens(const Var& tokens, int c, int h, int w);

}  // namespace scsm::sca
