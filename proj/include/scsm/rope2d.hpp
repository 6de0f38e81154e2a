#pragma once

#include "scsm/tensor.hpp"

#include <utility>
#include <vector>

namespace scsm::rope {

// Base angle schedules for the two image axes. Channel pairs are the
// interleaved (even, odd) channels; pair i rotates by m_x*theta_x[i] +
// m_y*theta_y[i] for a token at pixel (m_x, m_y).
struct RopeConfig {
    int d = 0;                      // even channel count
    std::vector<double> theta_x;    // d/2 width-direction base angles
    std::vector<double> theta_y;    // d/2 height-direction base angles
};

// Integer pixel coordinates (x, y) per token, in feature-map units.
struct PositionGrid {
    std::vector<std::pair<int, int>> pos;

    // Row-major grid of a h x w block whose top-left pixel sits at
    // (col0, row0) in full-map coordinates; token order matches the
    // row-major token order used everywhere else.
    static PositionGrid block(int row0, int col0, int h, int w);
};

// theta_x[i] = 10000^(-2(i-1)/d), theta_y[i] = 10000^(-(2(i-1)+1)/d), i 1-based.
RopeConfig base_angles(int d);

// Identical schedule on both axes (ablation baseline, not the default).
RopeConfig base_angles_identical(int d);

// Rotates every token of an {n, d} matrix in-place-pairwise; differentiable.
Var apply_rope(const Var& x, const PositionGrid& pos, const RopeConfig& cfg);

// Plain-value variant for oracle code paths.
Tensor apply_rope(const Tensor& x, const PositionGrid& pos, const RopeConfig& cfg);

// Materializes the full d x d block-diagonal rotation for one position.
Tensor explicit_rotation_oracle(const RopeConfig& cfg, int mx, int my);

}  // namespace scsm::rope
