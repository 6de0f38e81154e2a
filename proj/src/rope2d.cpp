#include "scsm/rope2d.hpp"

#include <cmath>

namespace scsm::rope {

PositionGrid PositionGrid::block(int row0, int col0, int h, int w) {
    PositionGrid g;
    g.pos.reserve(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) g.pos.emplace_back(col0 + j, row0 + i);
    return g;
}

RopeConfig base_angles(int d) {
    if (d < 2 || d % 2 != 0)
        throw ConfigError("base_angles: channel count must be even and >= 2, got " +
                          std::to_string(d));
    RopeConfig cfg;
    cfg.d = d;
    cfg.theta_x.resize(d / 2);
    cfg.theta_y.resize(d / 2);
    for (int i = 0; i < d / 2; ++i) {
        cfg.theta_x[i] = std::pow(10000.0, -2.0 * i / d);
        cfg.theta_y[i] = std::pow(10000.0, -(2.0 * i + 1.0) / d);
    }
    return cfg;
}

RopeConfig base_angles_identical(int d) {
    RopeConfig cfg = base_angles(d);
    cfg.theta_y = cfg.theta_x;
    return cfg;
}

namespace {

void rotate_token(const double* in, double* out, int d, const RopeConfig& cfg, int mx, int my) {
    for (int p = 0; p < d / 2; ++p) {
        const double ang = mx * cfg.theta_x[p] + my * cfg.theta_y[p];
        const double c = std::cos(ang), s = std::sin(ang);
        const double re = in[2 * p], im = in[2 * p + 1];
        out[2 * p] = c * re - s * im;
        out[2 * p + 1] = s * re + c * im;
    }
}

}  // namespace

Tensor apply_rope(const Tensor& x, const PositionGrid& pos, const RopeConfig& cfg) {
    if (x.rank() != 2 || x.shape()[1] != cfg.d)
        throw DimensionError("apply_rope: token width of " + x.shape_str() +
                             " does not match d=" + std::to_string(cfg.d));
    const int n = x.shape()[0];
    if (static_cast<int>(pos.pos.size()) != n)
        throw DimensionError("apply_rope: position count " + std::to_string(pos.pos.size()) +
                             " vs tokens " + std::to_string(n));
    Tensor out({n, cfg.d});
    for (int t = 0; t < n; ++t)
        rotate_token(x.data() + static_cast<std::int64_t>(t) * cfg.d,
                     out.data() + static_cast<std::int64_t>(t) * cfg.d, cfg.d, cfg,
                     pos.pos[t].first, pos.pos[t].second);
    return out;
}

Var apply_rope(const Var& x, const PositionGrid& pos, const RopeConfig& cfg) {
    Tensor out = apply_rope(x->value, pos, cfg);
    const int n = x->value.shape()[0];
    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    node->op = "apply_rope";
    node->requires_grad = x->requires_grad;
    if (x->requires_grad) {
        node->parents = {x};
        node->backward_fn = [x, pos, cfg, n](Node& nd) {
            // Per-token rotation is orthogonal; the adjoint is its transpose,
            // i.e. the rotation by the negated angle.
            Tensor& g = x->ensure_grad();
            const int d = cfg.d;
            for (int t = 0; t < n; ++t) {
                const double* gi = nd.grad.data() + static_cast<std::int64_t>(t) * d;
                double* go = g.data() + static_cast<std::int64_t>(t) * d;
                const int mx = pos.pos[t].first, my = pos.pos[t].second;
                for (int p = 0; p < d / 2; ++p) {
                    const double ang = mx * cfg.theta_x[p] + my * cfg.theta_y[p];
                    const double c = std::cos(ang), s = std::sin(ang);
                    go[2 * p] += c * gi[2 * p] + s * gi[2 * p + 1];
                    go[2 * p + 1] += -s * gi[2 * p] + c * gi[2 * p + 1];
                }
            }
        };
    }
    return node;
}

Tensor explicit_rotation_oracle(const RopeConfig& cfg, int mx, int my) {
    const int d = cfg.d;
    Tensor r({d, d});
    for (int p = 0; p < d / 2; ++p) {
        const double ang = mx * cfg.theta_x[p] + my * cfg.theta_y[p];
        const double c = std::cos(ang), s = std::sin(ang);
        r.at(2 * p, 2 * p) = c;
        r.at(2 * p, 2 * p + 1) = -s;
        r.at(2 * p + 1, 2 * p) = s;
        r.at(2 * p + 1, 2 * p + 1) = c;
    }
    return r;
}

}  // namespace scsm::rope
