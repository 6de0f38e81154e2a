// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 8 trains the full and ablated models end to end and is
// by far the slowest part (several minutes on one CPU core).

#include "scsm/data.hpp"
#include "scsm/dct2d.hpp"
#include "scsm/gradcheck.hpp"
#include "scsm/metrics.hpp"
#include "scsm/model.hpp"
#include "scsm/rope2d.hpp"
#include "scsm/runconfig.hpp"
#include "scsm/sca.hpp"
#include "scsm/smg.hpp"
#include "scsm/tensor.hpp"
#include "scsm/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace scsm;

namespace {

int g_failures = 0;

void report(int idx, const std::string& what, bool ok, const std::string& detail) {
    std::printf("criterion %2d [%s]: %s (%s)\n", idx, what.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor randn(std::mt19937_64& rng, std::vector<int> shape, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

// Criteria 1 and 2: the relative-offset identity against the explicit
// rotation-matrix oracle, plus isometry and the zero-offset identity.
void rope_criteria() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> pos_dist(-16, 16);
    const int dims[] = {2, 4, 16, 64};
    double worst_rel = 0.0, worst_iso = 0.0, worst_id = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = dims[trial % 4];
        rope::RopeConfig cfg = rope::base_angles(d);
        Tensor q = randn(rng, {1, d}), k = randn(rng, {1, d});
        const int mx = pos_dist(rng), my = pos_dist(rng);
        const int nx = pos_dist(rng), ny = pos_dist(rng);
        rope::PositionGrid pm, pn, rel;
        pm.pos = {{mx, my}};
        pn.pos = {{nx, ny}};
        rel.pos = {{nx - mx, ny - my}};

        Tensor qr = rope::apply_rope(q, pm, cfg);
        Tensor kr = rope::apply_rope(k, pn, cfg);
        double lhs = 0.0;
        for (int i = 0; i < d; ++i) lhs += qr[i] * kr[i];

        Tensor rot = rope::explicit_rotation_oracle(cfg, nx - mx, ny - my);
        double rhs = 0.0;
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += rot.at(i, j) * k[j];
            rhs += q[i] * acc;
        }
        worst_rel = std::max(worst_rel, std::abs(lhs - rhs));

        double nq = 0.0, nqr = 0.0;
        for (int i = 0; i < d; ++i) {
            nq += q[i] * q[i];
            nqr += qr[i] * qr[i];
        }
        worst_iso = std::max(worst_iso, std::abs(std::sqrt(nq) - std::sqrt(nqr)));

        rope::PositionGrid zero;
        zero.pos = {{0, 0}};
        Tensor qz = rope::apply_rope(q, zero, cfg);
        for (int i = 0; i < d; ++i) worst_id = std::max(worst_id, std::abs(qz[i] - q[i]));
    }
    const double dt = seconds_since(t0);
    {
        std::ostringstream d;
        d << "worst |lhs-rhs| " << worst_rel << " over 1000 draws, " << dt << " s";
        report(1, "rope relative-offset identity", worst_rel < 1e-9 && dt < 5.0, d.str());
    }
    {
        std::ostringstream d;
        d << "worst isometry " << worst_iso << ", worst zero-offset " << worst_id;
        report(2, "rope isometry and identity", worst_iso < 1e-12 && worst_id < 1e-12,
               d.str());
    }
}

void dct_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_gram = 0.0;
    for (int n : {7, 8}) {
        dct::DctBasis basis(n, n);
        // Gram of the flattened 2D basis images: <B_uv, B_u'v'> = delta.
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                for (int u2 = 0; u2 < n; ++u2)
                    for (int v2 = 0; v2 < n; ++v2) {
                        double dot = 0.0;
                        for (int x = 0; x < n; ++x)
                            for (int y = 0; y < n; ++y)
                                dot += basis.at(u, v, x, y) * basis.at(u2, v2, x, y);
                        const double want = (u == u2 && v == v2) ? 1.0 : 0.0;
                        worst_gram = std::max(worst_gram, std::abs(dot - want));
                    }
    }

    std::mt19937_64 rng(102);
    dct::DctBasis basis(7, 7);
    double worst_round = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Tensor img = randn(rng, {7, 7});
        Tensor back = dct::idct2(dct::dct2(img, basis), basis);
        for (std::int64_t i = 0; i < img.size(); ++i)
            worst_round = std::max(worst_round, std::abs(back[i] - img[i]));
    }

    Tensor constant(std::vector<int>{7, 7});
    for (std::int64_t i = 0; i < constant.size(); ++i) constant[i] = 3.5;
    Tensor spec = dct::dct2(constant, basis);
    double off_dc = 0.0;
    for (int u = 0; u < 7; ++u)
        for (int v = 0; v < 7; ++v)
            if (u || v) off_dc = std::max(off_dc, std::abs(spec.at(u, v)));
    const bool dc_only = off_dc < 1e-12 && std::abs(spec.at(0, 0) - 3.5 * 7.0) < 1e-10;

    const double dt = seconds_since(t0);
    std::ostringstream d;
    d << "gram " << worst_gram << ", round trip " << worst_round << ", off-DC " << off_dc
      << ", " << dt << " s";
    report(3, "orthonormal DCT suite",
           worst_gram < 1e-12 && worst_round < 1e-10 && dc_only && dt < 2.0, d.str());
}

void reduction_criterion() {
    std::mt19937_64 rng(103);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int c = 8;
        sca::Projections proj;
        proj.w_q = make_const(randn(rng, {c, c}, 0.5));
        proj.w_k = make_const(randn(rng, {c, c}, 0.5));
        proj.w_v = make_const(randn(rng, {c, c}, 0.5));
        dct::GateParams gate = dct::make_gate_params(c, 4);
        dct::DctBasis basis(dct::kGateGrid, dct::kGateGrid);
        dct::FrequencyList freqs = dct::select_frequencies_zigzag(4, 7, 7);
        rope::RopeConfig cfg = rope::base_angles(c);

        Tensor x = randn(rng, {4, c});
        Var xb = sca::from_tokens(make_const(x), c, 2, 2);
        auto layout = smg::make_layout(2, 2, 2, 2);
        sca::ScaOptions opts;
        opts.use_rope = false;
        opts.use_gate = false;
        Var out = sca::sca_forward({xb}, {xb}, {xb}, layout, proj, gate, freqs, basis, cfg,
                                   opts);
        Tensor got = sca::to_tokens(out)->value;
        Tensor want = sca::vanilla_attention(make_const(x), proj)->value;
        for (std::int64_t i = 0; i < got.size(); ++i)
            worst = std::max(worst, std::abs(got[i] - want[i]));
    }
    std::ostringstream d;
    d << "worst deviation " << worst << " over 20 random 4-token blocks";
    report(4, "vanilla-attention reduction", worst < 1e-12, d.str());
}

void gradcheck_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::ostringstream d;
    for (const auto& r : gradcheck::run("all")) {
        worst = std::max(worst, r.worst_error);
        d << r.name << " " << r.worst_error << ", ";
    }
    const double dt = seconds_since(t0);
    d << dt << " s";
    report(5, "finite-difference gradient checks", worst < 1e-5 && dt < 60.0, d.str());
}

void loss_criterion() {
    model::ScsmConfig cfg;
    Var one = make_const(Tensor({1}));
    one->value[0] = 1.0;
    Var total = add(scale(one, cfg.coeff_o),
                    add(scale(one, cfg.coeff_d), scale(one, cfg.coeff_a)));
    const bool combined = total->value[0] == 2.2;

    cfg.input_h = cfg.input_w = 32;
    cfg.stage1 = 4;
    cfg.stage2 = 6;
    cfg.stage3 = 8;
    cfg.chat = cfg.attn_channels = 8;
    cfg.num_freq = 4;
    cfg.block_h = cfg.block_w = 2;
    model::ScsmModel net(cfg);
    const bool lr0 = net.learning_rate(0) == 0.01;

    std::ostringstream d;
    d << "unit composition " << total->value[0] << ", lr(0) " << net.learning_rate(0);
    report(6, "loss weights and lr schedule", combined && lr0, d.str());
}

void scatter_criterion() {
    std::mt19937_64 rng(104);
    int bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> size_dist(2, 6);
        const int h = size_dist(rng), w = size_dist(rng), k = size_dist(rng), c = size_dist(rng);
        Tensor logits = randn(rng, {k, h, w}, 2.0);
        Tensor centers = randn(rng, {k, c});
        smg::ArgmaxMask mask = smg::argmax_mask(logits);
        Tensor out = smg::scatter(make_const(centers), mask)->value;
        for (int y = 0; y < h && bad == 0; ++y)
            for (int x = 0; x < w && bad == 0; ++x) {
                const int cls = mask.idx[y * w + x];
                for (int ch = 0; ch < c; ++ch)
                    if (out.at(ch, y, x) != centers.at(cls, ch)) {
                        ++bad;
                        break;
                    }
            }
    }
    std::ostringstream d;
    d << bad << " mismatching instances of 100";
    report(7, "SMG scatter bit-exactness", bad == 0, d.str());
}

void learning_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    cli::RunConfig cfg;  // defaults: 64x64, K=4, 400/100, 2000 iterations
    auto train_set = train::train_split(cfg);
    auto val_set = train::val_split(cfg);

    model::ScsmModel full(cfg.model);
    train::TrainResult full_res = train::run_training(full, cfg, train_set, val_set);
    const double full_time = seconds_since(t0);

    cli::RunConfig ab = cfg;
    ab.model.use_rope = false;
    ab.model.use_gate = false;
    ab.model.use_smg = false;
    model::ScsmModel ablated(ab.model);
    train::TrainResult ab_res = train::run_training(ablated, ab, train_set, val_set);

    const double full_miou = full_res.val_summary.miou;
    const double ab_miou = ab_res.val_summary.miou;
    std::ostringstream d;
    d << "full mIoU " << full_miou << " in " << full_time << " s, ablated mIoU " << ab_miou
      << ", gap " << (full_miou - ab_miou);
    report(8, "desk-scale learning",
           full_miou >= 0.80 && (full_miou - ab_miou) >= 0.02 && full_time < 900.0, d.str());
}

void mac_criterion() {
    const std::int64_t head = model::head_mac_count(32, 32, 64, 64, 4, 8, 8, 16);
    const std::int64_t dense = model::vanilla_mac_count(32, 32, 64, 64);
    std::ostringstream d;
    d << "head " << head << " MACs vs dense " << dense << " ("
      << 100.0 * static_cast<double>(head) / static_cast<double>(dense) << "%)";
    report(9, "head cost under half of global attention",
           head > 0 && static_cast<double>(head) < 0.5 * static_cast<double>(dense), d.str());
}

void io_criterion() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "scsm_acceptance_io";
    fs::create_directories(dir);
    bool ok = true;
    std::ostringstream d;
    try {
        std::mt19937_64 rng(105);
        Tensor t = randn(rng, {2, 3, 4});
        const std::string tpath = (dir / "t.sct").string();
        data::write_tensor(tpath, t);
        Tensor u = data::read_tensor(tpath);
        for (std::int64_t i = 0; i < t.size(); ++i)
            if (u[i] != t[i]) ok = false;

        data::SceneSample s = data::generate_scene(9, data::SceneMode::Urban, 64, 64);
        const std::string mpath = (dir / "m.pgm").string();
        data::write_mask(mpath, s.mask);
        if (data::read_mask(mpath).idx != s.mask.idx) ok = false;

        // Corrupted headers must surface as structured errors.
        std::ofstream((dir / "bad.sct").string(), std::ios::binary) << "NOPE";
        bool threw = false;
        try {
            data::read_tensor((dir / "bad.sct").string());
        } catch (const FormatError&) {
            threw = true;
        }
        if (!threw) ok = false;

        std::ofstream((dir / "bad.pgm").string(), std::ios::binary) << "P6 garbage";
        threw = false;
        try {
            data::read_mask((dir / "bad.pgm").string());
        } catch (const FormatError&) {
            threw = true;
        }
        if (!threw) ok = false;
        d << "tensor and mask round trips bit-exact, corruption raises FormatError";
    } catch (const std::exception& e) {
        ok = false;
        d << "unexpected exception: " << e.what();
    }
    fs::remove_all(dir);
    report(10, "file round trips and structured errors", ok, d.str());
}

}  // namespace

int main() {
    rope_criteria();
    dct_criterion();
    reduction_criterion();
    gradcheck_criterion();
    loss_criterion();
    scatter_criterion();
    mac_criterion();
    io_criterion();
    learning_criterion();  // last: minutes of training
    if (g_failures) {
        std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("acceptance: all criteria passed\n");
    return 0;
}
