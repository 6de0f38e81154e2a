#pragma once

#include "scsm/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace scsm::dct {

// Orthonormal 2D DCT-II basis over a T_H x T_W region.
// B[h,w,x,y] = a_h * a_w * cos(pi(2x+1)h / 2T_H) * cos(pi(2y+1)w / 2T_W).
class DctBasis {
public:
    DctBasis(int t_h, int t_w);

    int height() const { return t_h_; }
    int width() const { return t_w_; }
    double at(int h, int w, int x, int y) const {
        return values_[((static_cast<std::size_t>(h) * t_w_ + w) * t_h_ + x) * t_w_ + y];
    }

private:
    int t_h_, t_w_;
    std::vector<double> values_;
};

using FrequencyList = std::vector<std::pair<int, int>>;

// Forward / inverse transform of a {T_H, T_W} image. Direct O(n^4)
// evaluation; the 7x7 gate grid keeps this cheap.
Tensor dct2(const Tensor& a, const DctBasis& basis);
Tensor idct2(const Tensor& t, const DctBasis& basis);

// Deterministic frequency selection. "zigzag-low" walks anti-diagonals
// starting at the DC term; "explicit" passes the user list through.
FrequencyList select_frequencies_zigzag(int m, int t_h, int t_w);
FrequencyList select_frequencies_explicit(const FrequencyList& freqs, int t_h, int t_w);

// Two-layer perceptron (C -> C/r -> C) ending in a logistic squash.
struct GateParams {
    Var w1, b1;  // {C, C/r}, {C/r}
    Var w2, b2;  // {C/r, C}, {C}
};

GateParams make_gate_params(int channels, int reduction);

// Scene gate over one {C,h,w} block: channels split into M contiguous
// groups, each group pooled to the gate grid and read at its assigned
// frequency, then squashed through the perceptron. Output G in (0,1)^C.
Var scene_gate(const Var& block, const FrequencyList& freqs, const GateParams& params,
               const DctBasis& basis);

inline constexpr int kGateGrid = 7;  // pooled DCT grid per gate

}  // namespace scsm::dct
