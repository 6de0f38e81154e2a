#pragma once

#include "scsm/tensor.hpp"

#include <vector>

namespace scsm::smg {

// Per-pixel argmax class indices over a {K,H,W} logit map. Ties break toward
// the lowest class index.
struct ArgmaxMask {
    int height = 0, width = 0;
    std::vector<int> idx;  // row-major H*W

    int at(int r, int c) const { return idx[static_cast<std::size_t>(r) * width + c]; }
};

ArgmaxMask argmax_mask(const Tensor& logits);

// Blocked spatial layout. Non-final blocks tile disjointly; if an extent is
// not divisible by the block size the final start is clamped so the last
// block overlaps its neighbour.
struct BlockLayout {
    int map_h = 0, map_w = 0;
    int block_h = 0, block_w = 0;
    std::vector<int> row_starts;
    std::vector<int> col_starts;

    int count() const {
        return static_cast<int>(row_starts.size() * col_starts.size());
    }
};

BlockLayout make_layout(int map_h, int map_w, int block_h, int block_w);

std::vector<Var> split_blocks(const Var& x, const BlockLayout& layout);
Var merge_blocks(const std::vector<Var>& blocks, const BlockLayout& layout);

// Global class centers: spatial softmax of each class's logit plane gives the
// weights, centers are the weighted feature sums. r is {Chat,H,W}, d is
// {K,H,W}; result is {K, Chat}.
Var class_centers(const Var& r, const Var& d);

// Scatters center rows back onto the pixel grid: output channel vector at
// pixel p is centers[mask[p]]. Differentiable w.r.t. centers only.
Var scatter(const Var& centers, const ArgmaxMask& mask);

// Per-block center tables and scattered masks. Classes that win no argmax
// pixel inside a block take the corresponding global center row.
struct LocalMasks {
    std::vector<Var> s_l;        // scattered local masks, one per block
    std::vector<Var> centers_l;  // per-block {K,Chat} center tables
};

LocalMasks smg_local(const std::vector<Var>& r_blocks, const std::vector<Var>& d_blocks,
                     const Var& global_centers);

}  // namespace scsm::smg
