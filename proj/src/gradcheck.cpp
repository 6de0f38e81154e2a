#include "scsm/gradcheck.hpp"

#include "scsm/dct2d.hpp"
#include "scsm/model.hpp"
#include "scsm/rope2d.hpp"
#include "scsm/sca.hpp"
#include "scsm/smg.hpp"
#include "scsm/tensor.hpp"

#include <random>

namespace scsm::gradcheck {

namespace {

Tensor randn(std::mt19937_64& rng, std::vector<int> shape, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

// f(x) = sum(w . rope(x)) with a fixed weighting so every component matters.
double suite_rope() {
    std::mt19937_64 rng(41);
    const int n = 6, d = 8;
    auto cfg = rope::base_angles(d);
    rope::PositionGrid pos;
    for (int t = 0; t < n; ++t)
        pos.pos.emplace_back(static_cast<int>(rng() % 16), static_cast<int>(rng() % 16));
    Tensor w = randn(rng, {n, d});
    auto f = [&](const std::vector<Var>& xs) {
        return sum(mul(rope::apply_rope(xs[0], pos, cfg), make_const(w)));
    };
    return grad_check(f, {randn(rng, {n, d})});
}

double suite_dct() {
    std::mt19937_64 rng(42);
    const int c = 16, m = 4, h = 5, w = 6;
    dct::DctBasis basis(dct::kGateGrid, dct::kGateGrid);
    auto freqs = dct::select_frequencies_zigzag(m, dct::kGateGrid, dct::kGateGrid);
    Tensor probe = randn(rng, {c});
    auto f = [&](const std::vector<Var>& xs) {
        dct::GateParams p{xs[1], xs[2], xs[3], xs[4]};
        Var g = dct::scene_gate(xs[0], freqs, p, basis);
        return sum(mul(g, make_const(probe)));
    };
    return grad_check(f, {randn(rng, {c, h, w}), randn(rng, {c, c / 4}, 0.5),
                          randn(rng, {c / 4}, 0.5), randn(rng, {c / 4, c}, 0.5),
                          randn(rng, {c}, 0.5)});
}

double suite_smg() {
    std::mt19937_64 rng(43);
    const int chat = 6, k = 3, h = 6, w = 6;
    Tensor probe = randn(rng, {chat, h, w});
    Tensor d_fixed = randn(rng, {k, h, w});
    auto layout = smg::make_layout(h, w, 3, 3);
    auto f = [&](const std::vector<Var>& xs) {
        Var centers = smg::class_centers(xs[0], xs[1]);
        Var s = smg::scatter(centers, smg::argmax_mask(d_fixed));
        auto r_blocks = smg::split_blocks(xs[0], layout);
        auto d_blocks = smg::split_blocks(xs[1], layout);
        auto local = smg::smg_local(r_blocks, d_blocks, centers);
        Var merged = smg::merge_blocks(local.s_l, layout);
        return add(sum(mul(s, make_const(probe))), sum(mul(merged, make_const(probe))));
    };
    // The scatter masks come from the perturbed logits; keep the logit
    // perturbation away from argmax ties by using well-separated draws.
    return grad_check(f, {randn(rng, {chat, h, w}), randn(rng, {k, h, w}, 2.0)});
}

double suite_sca() {
    std::mt19937_64 rng(44);
    const int chat = 8, c = 8, h = 4, w = 4, k = 3;
    dct::DctBasis basis(dct::kGateGrid, dct::kGateGrid);
    auto freqs = dct::select_frequencies_zigzag(4, dct::kGateGrid, dct::kGateGrid);
    auto cfg = rope::base_angles(c);
    auto layout = smg::make_layout(h, w, 2, 2);
    Tensor probe = randn(rng, {c, h, w});
    Tensor d_fixed = randn(rng, {k, h, w}, 2.0);
    auto f = [&](const std::vector<Var>& xs) {
        sca::Projections proj{xs[1], xs[2], xs[3]};
        dct::GateParams gate{xs[4], xs[5], xs[6], xs[7]};
        Var centers = smg::class_centers(xs[0], make_const(d_fixed));
        Var s = smg::scatter(centers, smg::argmax_mask(d_fixed));
        auto r_blocks = smg::split_blocks(xs[0], layout);
        auto s_g_blocks = smg::split_blocks(s, layout);
        auto d_blocks = smg::split_blocks(make_const(d_fixed), layout);
        auto local = smg::smg_local(r_blocks, d_blocks, centers);
        Var r_a = sca::sca_forward(r_blocks, local.s_l, s_g_blocks, layout, proj, gate, freqs,
                                   basis, cfg);
        return sum(mul(r_a, make_const(probe)));
    };
    return grad_check(f, {randn(rng, {chat, h, w}), randn(rng, {chat, c}, 0.5),
                          randn(rng, {chat, c}, 0.5), randn(rng, {chat, c}, 0.5),
                          randn(rng, {c, 2}, 0.5), randn(rng, {2}, 0.5),
                          randn(rng, {2, c}, 0.5), randn(rng, {c}, 0.5)});
}

double suite_model() {
    model::ScsmConfig cfg;
    cfg.input_h = 16;
    cfg.input_w = 16;
    cfg.stage1 = 4;
    cfg.stage2 = 6;
    cfg.stage3 = 8;
    cfg.chat = 8;
    cfg.attn_channels = 8;
    cfg.num_freq = 4;
    cfg.block_h = 2;
    cfg.block_w = 2;
    cfg.gate_reduction = 4;
    cfg.num_classes = 4;
    cfg.seed = 5;
    model::ScsmModel net(cfg);

    std::mt19937_64 rng(45);
    Tensor image = randn(rng, {3, 16, 16}, 0.5);
    smg::ArgmaxMask truth;
    truth.height = 16;
    truth.width = 16;
    truth.idx.resize(16 * 16);
    for (auto& v : truth.idx) v = static_cast<int>(rng() % 4);

    auto loss_value = [&]() {
        auto fwd = net.forward(image);
        return net.total_loss(fwd, truth).total;
    };

    // Analytic gradients on the live parameter leaves.
    {
        auto fwd = net.forward(image);
        backward(net.total_loss(fwd, truth).total_var);
    }

    // Finite differences over a sampled subset of each parameter tensor.
    const double eps = 1e-5;
    double worst = 0.0;
    for (const auto& [name, p] : net.params()) {
        const bool has_grad = p->grad.size() == p->value.size();
        for (int s = 0; s < 4; ++s) {
            const std::int64_t i = static_cast<std::int64_t>(rng() %
                                       static_cast<std::uint64_t>(p->value.size()));
            const double orig = p->value[i];
            p->value[i] = orig + eps;
            const double fp = loss_value();
            p->value[i] = orig - eps;
            const double fm = loss_value();
            p->value[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = has_grad ? p->grad[i] : 0.0;
            worst = std::max(worst, std::abs(analytic - numeric) /
                                        std::max({1.0, std::abs(analytic), std::abs(numeric)}));
        }
    }
    return worst;
}

}  // namespace

std::vector<SuiteResult> run(const std::string& selector) {
    std::vector<SuiteResult> out;
    auto want = [&](const char* n) { return selector == "all" || selector == n; };
    if (want("rope")) out.push_back({"rope", suite_rope()});
    if (want("dct")) out.push_back({"dct", suite_dct()});
    if (want("smg")) out.push_back({"smg", suite_smg()});
    if (want("sca")) out.push_back({"sca", suite_sca()});
    if (want("model")) out.push_back({"model", suite_model()});
    if (out.empty()) throw ConfigError("unknown gradcheck selector: " + selector);
    return out;
}

}  // namespace scsm::gradcheck
