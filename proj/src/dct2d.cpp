#include "scsm/dct2d.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace scsm::dct {

DctBasis::DctBasis(int t_h, int t_w) : t_h_(t_h), t_w_(t_w) {
    if (t_h < 1 || t_w < 1) throw ConfigError("DctBasis: extents must be >= 1");
    values_.resize(static_cast<std::size_t>(t_h) * t_w * t_h * t_w);
    const double pi = std::numbers::pi;
    auto alpha = [](int k, int n) {
        return k == 0 ? 1.0 / std::sqrt(static_cast<double>(n)) : std::sqrt(2.0 / n);
    };
    std::size_t idx = 0;
    for (int h = 0; h < t_h; ++h)
        for (int w = 0; w < t_w; ++w) {
            const double aw = alpha(h, t_h) * alpha(w, t_w);
            for (int x = 0; x < t_h; ++x)
                for (int y = 0; y < t_w; ++y)
                    values_[idx++] = aw * std::cos(pi * (2 * x + 1) * h / (2.0 * t_h)) *
                                     std::cos(pi * (2 * y + 1) * w / (2.0 * t_w));
        }
}

Tensor dct2(const Tensor& a, const DctBasis& basis) {
    if (a.rank() != 2 || a.shape()[0] != basis.height() || a.shape()[1] != basis.width())
        throw DimensionError("dct2: image " + a.shape_str() + " does not match basis " +
                             std::to_string(basis.height()) + "x" + std::to_string(basis.width()));
    const int th = basis.height(), tw = basis.width();
    Tensor t({th, tw});
    for (int h = 0; h < th; ++h)
        for (int w = 0; w < tw; ++w) {
            double acc = 0.0;
            for (int x = 0; x < th; ++x)
                for (int y = 0; y < tw; ++y) acc += a.at(x, y) * basis.at(h, w, x, y);
            t.at(h, w) = acc;
        }
    return t;
}

Tensor idct2(const Tensor& t, const DctBasis& basis) {
    if (t.rank() != 2 || t.shape()[0] != basis.height() || t.shape()[1] != basis.width())
        throw DimensionError("idct2: spectrum " + t.shape_str() + " does not match basis");
    const int th = basis.height(), tw = basis.width();
    Tensor a({th, tw});
    for (int x = 0; x < th; ++x)
        for (int y = 0; y < tw; ++y) {
            double acc = 0.0;
            for (int h = 0; h < th; ++h)
                for (int w = 0; w < tw; ++w) acc += t.at(h, w) * basis.at(h, w, x, y);
            a.at(x, y) = acc;
        }
    return a;
}

FrequencyList select_frequencies_zigzag(int m, int t_h, int t_w) {
    if (m < 1 || m > t_h * t_w)
        throw ConfigError("select_frequencies: M=" + std::to_string(m) + " exceeds grid " +
                          std::to_string(t_h) + "x" + std::to_string(t_w));
    // Anti-diagonal walk: (0,0),(0,1),(1,0),(2,0),(1,1),(0,2),...
    // Even diagonals run bottom-left to top-right, odd ones the reverse.
    FrequencyList out;
    for (int d = 0; d < t_h + t_w - 1 && static_cast<int>(out.size()) < m; ++d) {
        FrequencyList diag;
        for (int h = 0; h < t_h; ++h) {
            const int w = d - h;
            if (w >= 0 && w < t_w) diag.emplace_back(h, w);
        }
        if (d % 2 == 0) std::reverse(diag.begin(), diag.end());
        for (auto& f : diag) {
            if (static_cast<int>(out.size()) >= m) break;
            out.push_back(f);
        }
    }
    return out;
}

FrequencyList select_frequencies_explicit(const FrequencyList& freqs, int t_h, int t_w) {
    std::set<std::pair<int, int>> seen;
    for (auto& [h, w] : freqs) {
        if (h < 0 || h >= t_h || w < 0 || w >= t_w)
            throw ConfigError("select_frequencies: explicit index (" + std::to_string(h) + "," +
                              std::to_string(w) + ") outside " + std::to_string(t_h) + "x" +
                              std::to_string(t_w) + " grid");
        if (!seen.insert({h, w}).second)
            throw ConfigError("select_frequencies: duplicate explicit index (" +
                              std::to_string(h) + "," + std::to_string(w) + ")");
    }
    return freqs;
}

GateParams make_gate_params(int channels, int reduction) {
    if (reduction < 1 || channels % reduction != 0)
        throw ConfigError("make_gate_params: reduction must divide channel count");
    const int hidden = channels / reduction;
    GateParams p;
    p.w1 = make_param(Tensor({channels, hidden}));
    p.b1 = make_param(Tensor({hidden}));
    p.w2 = make_param(Tensor({hidden, channels}));
    p.b2 = make_param(Tensor({channels}));
    return p;
}

namespace {

// Linear frequency read-out: out[c] = sum_{x,y} pooled[c,x,y] * B[f(c), x, y]
// where f(c) is the frequency assigned to channel c's group.
Var extract_coefficients(const Var& pooled, const std::vector<std::pair<int, int>>& per_channel,
                         const DctBasis& basis) {
    const int C = pooled->value.shape()[0];
    const int th = basis.height(), tw = basis.width();
    Tensor out({1, C});
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int x = 0; x < th; ++x)
            for (int y = 0; y < tw; ++y)
                acc += pooled->value.at(c, x, y) *
                       basis.at(per_channel[c].first, per_channel[c].second, x, y);
        out.at(0, c) = acc;
    }
    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    node->op = "dct_extract";
    node->requires_grad = pooled->requires_grad;
    if (pooled->requires_grad) {
        node->parents = {pooled};
        node->backward_fn = [pooled, per_channel, &basis, C, th, tw](Node& nd) {
            Tensor& g = pooled->ensure_grad();
            for (int c = 0; c < C; ++c) {
                const double gv = nd.grad.at(0, c);
                for (int x = 0; x < th; ++x)
                    for (int y = 0; y < tw; ++y)
                        g.at(c, x, y) +=
                            gv * basis.at(per_channel[c].first, per_channel[c].second, x, y);
            }
        };
    }
    return node;
}

}  // namespace

Var scene_gate(const Var& block, const FrequencyList& freqs, const GateParams& params,
               const DctBasis& basis) {
    if (block->value.rank() != 3)
        throw DimensionError("scene_gate: expected {C,h,w} block, got " +
                             block->value.shape_str());
    const int C = block->value.shape()[0];
    const int M = static_cast<int>(freqs.size());
    if (M == 0 || C % M != 0)
        throw ConfigError("scene_gate: channel count " + std::to_string(C) +
                          " not divisible by frequency count " + std::to_string(M));

    // Group g = c / (C/M) reads its DCT coefficient at freqs[g].
    std::vector<std::pair<int, int>> per_channel(C);
    const int group = C / M;
    for (int c = 0; c < C; ++c) per_channel[c] = freqs[c / group];

    Var pooled = adaptive_avg_pool(block, basis.height(), basis.width());
    Var coeff = extract_coefficients(pooled, per_channel, basis);  // {1, C}

    Var h = silu(add_rowvec(matmul(coeff, params.w1), params.b1));
    Var logits = add_rowvec(matmul(h, params.w2), params.b2);
    return reshape(sigmoid(logits), {C});
}

}  // namespace scsm::dct
