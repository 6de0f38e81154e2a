#include "scsm/sca.hpp"

#include <cmath>

namespace scsm::sca {

Var to_tokens(const Var& block) {
    if (block->value.rank() != 3) throw DimensionError("to_tokens: expected {C,h,w}");
    const int c = block->value.shape()[0];
    const int hw = block->value.shape()[1] * block->value.shape()[2];
    return transpose(reshape(block, {c, hw}));
}

Var from_tokens(const Var& tokens, int c, int h, int w) {
    if (tokens->value.rank() != 2 || tokens->value.shape()[1] != c ||
        tokens->value.shape()[0] != h * w)
        throw DimensionError("from_tokens: token matrix " + tokens->value.shape_str() +
                             " does not fold to {" + std::to_string(c) + "," +
                             std::to_string(h) + "," + std::to_string(w) + "}");
    return reshape(transpose(tokens), {c, h, w});
}

Var vanilla_attention(const Var& tokens, const Projections& proj) {
    const int c = proj.w_q->value.shape()[1];
    Var q = matmul(tokens, proj.w_q);
    Var k = matmul(tokens, proj.w_k);
    Var v = matmul(tokens, proj.w_v);
    Var t = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(c)));
    return matmul(softmax(t, 1), v);
}

Var sca_affinity(const Var& q, const Var& k, const rope::PositionGrid& pos,
                 const std::optional<Var>& gate, const std::optional<rope::RopeConfig>& cfg) {
    const int c = q->value.shape()[1];
    if (k->value.shape()[1] != c)
        throw DimensionError("sca_affinity: q/k channel mismatch " + q->value.shape_str() +
                             " vs " + k->value.shape_str());
    if (gate && (*gate)->value.size() != c)
        throw DimensionError("sca_affinity: gate length " +
                             std::to_string((*gate)->value.size()) + " vs channels " +
                             std::to_string(c));
    Var qr = cfg ? rope::apply_rope(q, pos, *cfg) : q;
    Var kr = cfg ? rope::apply_rope(k, pos, *cfg) : k;
    Var qg = gate ? mul_colwise(qr, *gate) : qr;
    return scale(matmul(qg, transpose(kr)), 1.0 / std::sqrt(static_cast<double>(c)));
}

ScaBlockResult sca_block(const Var& r_l_tokens, const Var& s_l_tokens, const Var& s_g_tokens,
                         const rope::PositionGrid& pos, const Projections& proj,
                         const dct::GateParams& gate_params, const dct::FrequencyList& freqs,
                         const dct::DctBasis& basis, const rope::RopeConfig& cfg,
                         int block_h, int block_w, const ScaOptions& opts) {
    const int c = proj.w_q->value.shape()[1];
    Var q = matmul(r_l_tokens, proj.w_q);
    Var k = matmul(s_l_tokens, proj.w_k);
    Var v = matmul(s_g_tokens, proj.w_v);

    std::optional<Var> gate;
    if (opts.use_gate)
        gate = dct::scene_gate(from_tokens(q, c, block_h, block_w), freqs, gate_params, basis);
    std::optional<rope::RopeConfig> rc;
    if (opts.use_rope) rc = cfg;

    ScaBlockResult res;
    res.affinity = sca_affinity(q, k, pos, gate, rc);
    res.weights = softmax(res.affinity, 1);
    res.output = matmul(res.weights, v);
    return res;
}

Var sca_forward(const std::vector<Var>& r_blocks, const std::vector<Var>& s_l_blocks,
                const std::vector<Var>& s_g_blocks, const smg::BlockLayout& layout,
                const Projections& proj, const dct::GateParams& gate_params,
                const dct::FrequencyList& freqs, const dct::DctBasis& basis,
                const rope::RopeConfig& cfg, const ScaOptions& opts,
                std::vector<ScaBlockResult>* diag) {
    if (r_blocks.size() != s_l_blocks.size() || r_blocks.size() != s_g_blocks.size())
        throw DimensionError("sca_forward: block list sizes disagree");
    const int c = proj.w_q->value.shape()[1];
    const int bh = layout.block_h, bw = layout.block_w;

    std::vector<Var> out_blocks;
    out_blocks.reserve(r_blocks.size());
    std::size_t bi = 0;
    for (int r0 : layout.row_starts)
        for (int c0 : layout.col_starts) {
            const auto pos = rope::PositionGrid::block(r0, c0, bh, bw);
            ScaBlockResult res =
                sca_block(to_tokens(r_blocks[bi]), to_tokens(s_l_blocks[bi]),
                          to_tokens(s_g_blocks[bi]), pos, proj, gate_params, freqs, basis, cfg,
                          bh, bw, opts);
            if (diag) diag->push_back(res);
            out_blocks.push_back(from_tokens(res.output, c, bh, bw));
            ++bi;
        }
    return smg::merge_blocks(out_blocks, layout);
}

Var fuse_output(const Var& r_a, const Var& r, const Var& kernel, const Var& bias) {
    if (r_a->value.shape()[1] != r->value.shape()[1] ||
        r_a->value.shape()[2] != r->value.shape()[2])
        throw DimensionError("fuse_output: spatial mismatch " + r_a->value.shape_str() + " vs " +
                             r->value.shape_str());
    const int pad = (static_cast<int>(kernel->value.shape()[2]) - 1) / 2;
    return conv2d(concat_channels(r_a, r), kernel, bias, 1, pad);
}

}  // namespace scsm::sca
