#include "scsm/smg.hpp"

#include <cmath>

namespace scsm::smg {

ArgmaxMask argmax_mask(const Tensor& logits) {
    if (logits.rank() != 3) throw DimensionError("argmax_mask: expected {K,H,W}");
    const int K = logits.shape()[0], H = logits.shape()[1], W = logits.shape()[2];
    ArgmaxMask m;
    m.height = H;
    m.width = W;
    m.idx.resize(static_cast<std::size_t>(H) * W);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            int best = 0;
            double bv = logits.at(0, r, c);
            for (int k = 1; k < K; ++k) {
                const double v = logits.at(k, r, c);
                if (v > bv) {  // strict: ties keep the lowest index
                    bv = v;
                    best = k;
                }
            }
            m.idx[static_cast<std::size_t>(r) * W + c] = best;
        }
    return m;
}

BlockLayout make_layout(int map_h, int map_w, int block_h, int block_w) {
    if (block_h < 1 || block_w < 1 || block_h > map_h || block_w > map_w)
        throw ConfigError("make_layout: block " + std::to_string(block_h) + "x" +
                          std::to_string(block_w) + " does not fit map " + std::to_string(map_h) +
                          "x" + std::to_string(map_w));
    BlockLayout l;
    l.map_h = map_h;
    l.map_w = map_w;
    l.block_h = block_h;
    l.block_w = block_w;
    auto starts = [](int extent, int block) {
        std::vector<int> s;
        for (int o = 0; o + block <= extent; o += block) s.push_back(o);
        if (s.empty() || s.back() + block < extent) s.push_back(extent - block);
        return s;
    };
    l.row_starts = starts(map_h, block_h);
    l.col_starts = starts(map_w, block_w);
    return l;
}

std::vector<Var> split_blocks(const Var& x, const BlockLayout& layout) {
    if (x->value.rank() != 3 || x->value.shape()[1] != layout.map_h ||
        x->value.shape()[2] != layout.map_w)
        throw DimensionError("split_blocks: map " + x->value.shape_str() +
                             " does not match layout");
    std::vector<Var> blocks;
    blocks.reserve(static_cast<std::size_t>(layout.count()));
    for (int r0 : layout.row_starts)
        for (int c0 : layout.col_starts)
            blocks.push_back(slice_spatial(x, r0, c0, layout.block_h, layout.block_w));
    return blocks;
}

Var merge_blocks(const std::vector<Var>& blocks, const BlockLayout& layout) {
    if (blocks.size() != static_cast<std::size_t>(layout.count()))
        throw DimensionError("merge_blocks: block count " + std::to_string(blocks.size()) +
                             " vs layout " + std::to_string(layout.count()));
    const int C = blocks[0]->value.shape()[0];
    const int bh = layout.block_h, bw = layout.block_w;
    for (const auto& b : blocks)
        if (b->value.shape() != std::vector<int>{C, bh, bw})
            throw DimensionError("merge_blocks: block shape " + b->value.shape_str() +
                                 " inconsistent with layout");

    // Pixel multiplicity; overlap cells average their contributions.
    Tensor count({layout.map_h, layout.map_w});
    for (int r0 : layout.row_starts)
        for (int c0 : layout.col_starts)
            for (int i = 0; i < bh; ++i)
                for (int j = 0; j < bw; ++j) count.at(r0 + i, c0 + j) += 1.0;

    Tensor out({C, layout.map_h, layout.map_w});
    std::size_t bi = 0;
    for (int r0 : layout.row_starts)
        for (int c0 : layout.col_starts) {
            const Tensor& bv = blocks[bi++]->value;
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < bh; ++i)
                    for (int j = 0; j < bw; ++j)
                        out.at(c, r0 + i, c0 + j) +=
                            bv.at(c, i, j) / count.at(r0 + i, c0 + j);
        }

    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    node->op = "merge_blocks";
    for (const auto& b : blocks) node->requires_grad = node->requires_grad || b->requires_grad;
    if (node->requires_grad) {
        node->parents = blocks;
        node->backward_fn = [blocks, layout, count, C, bh, bw](Node& nd) {
            std::size_t bi = 0;
            for (int r0 : layout.row_starts)
                for (int c0 : layout.col_starts) {
                    const Var& b = blocks[bi++];
                    if (!b->requires_grad) continue;
                    Tensor& g = b->ensure_grad();
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < bh; ++i)
                            for (int j = 0; j < bw; ++j)
                                g.at(c, i, j) += nd.grad.at(c, r0 + i, c0 + j) /
                                                 count.at(r0 + i, c0 + j);
                }
        };
    }
    return node;
}

Var class_centers(const Var& r, const Var& d) {
    if (r->value.rank() != 3 || d->value.rank() != 3 ||
        r->value.shape()[1] != d->value.shape()[1] ||
        r->value.shape()[2] != d->value.shape()[2])
        throw DimensionError("class_centers: feature map " + r->value.shape_str() +
                             " vs logits " + d->value.shape_str());
    const int chat = r->value.shape()[0];
    const int K = d->value.shape()[0];
    const int hw = r->value.shape()[1] * r->value.shape()[2];
    // Spatial softmax per class, then the K x HW by HW x Chat product.
    Var weights = softmax(reshape(d, {K, hw}), 1);
    Var feats = transpose(reshape(r, {chat, hw}));
    return matmul(weights, feats);
}

Var scatter(const Var& centers, const ArgmaxMask& mask) {
    if (centers->value.rank() != 2) throw DimensionError("scatter: expected {K,Chat} centers");
    const int K = centers->value.shape()[0], chat = centers->value.shape()[1];
    const int H = mask.height, W = mask.width;
    for (int i : mask.idx)
        if (i < 0 || i >= K)
            throw DimensionError("scatter: mask index " + std::to_string(i) +
                                 " outside class count " + std::to_string(K));
    Tensor out({chat, H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const int k = mask.at(r, c);
            for (int ch = 0; ch < chat; ++ch) out.at(ch, r, c) = centers->value.at(k, ch);
        }
    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    node->op = "scatter";
    node->requires_grad = centers->requires_grad;
    if (centers->requires_grad) {
        node->parents = {centers};
        node->backward_fn = [centers, mask, chat, H, W](Node& nd) {
            Tensor& g = centers->ensure_grad();
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    const int k = mask.at(r, c);
                    for (int ch = 0; ch < chat; ++ch) g.at(k, ch) += nd.grad.at(ch, r, c);
                }
        };
    }
    return node;
}

LocalMasks smg_local(const std::vector<Var>& r_blocks, const std::vector<Var>& d_blocks,
                     const Var& global_centers) {
    if (r_blocks.size() != d_blocks.size())
        throw DimensionError("smg_local: feature/logit block counts differ");
    const int K = global_centers->value.shape()[0];
    LocalMasks out;
    out.s_l.reserve(r_blocks.size());
    out.centers_l.reserve(r_blocks.size());
    for (std::size_t b = 0; b < r_blocks.size(); ++b) {
        ArgmaxMask mask = argmax_mask(d_blocks[b]->value);
        Var local = class_centers(r_blocks[b], d_blocks[b]);

        std::vector<char> present(static_cast<std::size_t>(K), 0);
        for (int i : mask.idx) present[static_cast<std::size_t>(i)] = 1;
        Tensor keep({K}), fall({K});
        bool any_absent = false;
        for (int k = 0; k < K; ++k) {
            keep[k] = present[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
            fall[k] = 1.0 - keep[k];
            any_absent = any_absent || !present[static_cast<std::size_t>(k)];
        }
        // Absent classes take the global row so keys stay defined.
        Var table = any_absent
                        ? add(mul_rowwise(local, make_const(keep)),
                              mul_rowwise(global_centers, make_const(fall)))
                        : local;
        out.centers_l.push_back(table);
        out.s_l.push_back(scatter(table, mask));
    }
    return out;
}

}  // namespace scsm::smg
