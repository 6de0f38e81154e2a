#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scsm/rope2d.hpp"

#include <cmath>
#include <random>

using namespace scsm;
using namespace scsm::rope;

namespace {

Tensor randn(std::mt19937_64& rng, std::vector<int> shape) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace

TEST_CASE("base angle schedules") {
    auto c4 = base_angles(4);
    CHECK(c4.theta_x[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c4.theta_x[1] == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(c4.theta_y[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(c4.theta_y[1] == doctest::Approx(0.001).epsilon(1e-15));

    auto c2 = base_angles(2);
    CHECK(c2.theta_x[0] == doctest::Approx(1.0));
    CHECK(c2.theta_y[0] == doctest::Approx(0.01));

    // Element-wise distinct schedules.
    for (int d : {2, 4, 16, 64}) {
        auto c = base_angles(d);
        for (int i = 0; i < d / 2; ++i) CHECK(c.theta_x[i] != c.theta_y[i]);
    }
    CHECK_THROWS_AS(base_angles(3), ConfigError);
    CHECK_THROWS_AS(base_angles(0), ConfigError);
}

TEST_CASE("apply_rope: zero position is the identity") {
    std::mt19937_64 rng(10);
    auto cfg = base_angles(8);
    Tensor x = randn(rng, {3, 8});
    PositionGrid pos;
    pos.pos = {{0, 0}, {0, 0}, {0, 0}};
    Tensor y = apply_rope(x, pos, cfg);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-15));
}

TEST_CASE("apply_rope: explicit 2x2 rotation") {
    RopeConfig cfg;
    cfg.d = 2;
    cfg.theta_x = {1.0};
    cfg.theta_y = {0.5};
    PositionGrid pos;
    pos.pos = {{1, 0}};
    Tensor y = apply_rope(Tensor({1, 2}, {1.0, 0.0}), pos, cfg);
    CHECK(y[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
}

TEST_CASE("apply_rope preserves token norms") {
    std::mt19937_64 rng(11);
    auto cfg = base_angles(16);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = randn(rng, {1, 16});
        PositionGrid pos;
        pos.pos = {{static_cast<int>(rng() % 64), static_cast<int>(rng() % 64)}};
        CHECK(std::abs(norm(apply_rope(x, pos, cfg)) - norm(x)) < 1e-12);
    }
}

TEST_CASE("apply_rope rejects width mismatch") {
    auto cfg = base_angles(4);
    PositionGrid pos;
    pos.pos = {{0, 0}};
    CHECK_THROWS_AS(apply_rope(Tensor({1, 6}), pos, cfg), DimensionError);
}

TEST_CASE("explicit rotation oracle is orthogonal with determinant 1") {
    auto cfg = base_angles(6);
    for (auto [mx, my] : {std::pair{0, 0}, {3, 7}, {-2, 5}}) {
        Tensor r = explicit_rotation_oracle(cfg, mx, my);
        // R^T R = I
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                double acc = 0.0;
                for (int k = 0; k < 6; ++k) acc += r.at(k, i) * r.at(k, j);
                CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
        // Block-diagonal planar rotations: det = product of 2x2 dets = 1.
        double det = 1.0;
        for (int p = 0; p < 3; ++p)
            det *= r.at(2 * p, 2 * p) * r.at(2 * p + 1, 2 * p + 1) -
                   r.at(2 * p, 2 * p + 1) * r.at(2 * p + 1, 2 * p);
        CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
    }
    Tensor eye = explicit_rotation_oracle(cfg, 0, 0);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(eye.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("oracle matches apply_rope on basis vectors") {
    auto cfg = base_angles(4);
    Tensor r = explicit_rotation_oracle(cfg, 1, 1);
    PositionGrid pos;
    pos.pos = {{1, 1}};
    for (int b = 0; b < 4; ++b) {
        Tensor e({1, 4});
        e[b] = 1.0;
        Tensor rot = apply_rope(e, pos, cfg);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(rot[i] - r.at(i, b)) < 1e-12);
    }
}

TEST_CASE("relative-offset identity over random draws") {
    std::mt19937_64 rng(12);
    for (int d : {2, 4, 16}) {
        auto cfg = base_angles(d);
        for (int trial = 0; trial < 50; ++trial) {
            Tensor q = randn(rng, {1, d}), k = randn(rng, {1, d});
            const int mx = static_cast<int>(rng() % 32), my = static_cast<int>(rng() % 32);
            const int nx = static_cast<int>(rng() % 32), ny = static_cast<int>(rng() % 32);
            PositionGrid pm, pn;
            pm.pos = {{mx, my}};
            pn.pos = {{nx, ny}};
            const double lhs = dot(apply_rope(q, pm, cfg), apply_rope(k, pn, cfg));
            Tensor rel = explicit_rotation_oracle(cfg, nx - mx, ny - my);
            double rhs = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) rhs += q[i] * rel.at(i, j) * k[j];
            CHECK(std::abs(lhs - rhs) < 1e-9);
        }
    }
}

TEST_CASE("translation invariance of rotated inner products") {
    std::mt19937_64 rng(13);
    auto cfg = base_angles(8);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor q = randn(rng, {1, 8}), k = randn(rng, {1, 8});
        const int mx = static_cast<int>(rng() % 16), my = static_cast<int>(rng() % 16);
        const int nx = static_cast<int>(rng() % 16), ny = static_cast<int>(rng() % 16);
        const int ox = static_cast<int>(rng() % 10), oy = static_cast<int>(rng() % 10);
        PositionGrid pm, pn, pmo, pno;
        pm.pos = {{mx, my}};
        pn.pos = {{nx, ny}};
        pmo.pos = {{mx + ox, my + oy}};
        pno.pos = {{nx + ox, ny + oy}};
        const double base = dot(apply_rope(q, pm, cfg), apply_rope(k, pn, cfg));
        const double shifted = dot(apply_rope(q, pmo, cfg), apply_rope(k, pno, cfg));
        CHECK(std::abs(base - shifted) < 1e-9);
    }
}

TEST_CASE("apply_rope is differentiable") {
    std::mt19937_64 rng(14);
    auto cfg = base_angles(6);
    PositionGrid pos;
    pos.pos = {{3, 4}, {1, 2}};
    Tensor probe = randn(rng, {2, 6});
    auto f = [&](const std::vector<Var>& xs) {
        return sum(mul(apply_rope(xs[0], pos, cfg), make_const(probe)));
    };
    CHECK(grad_check(f, {randn(rng, {2, 6})}) < 1e-6);
}
