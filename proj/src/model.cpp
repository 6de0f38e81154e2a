#include "scsm/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace scsm::model {

void ScsmConfig::validate() const {
    if (input_h % 8 != 0 || input_w % 8 != 0)
        throw ConfigError("input extents must be divisible by 8, got " +
                          std::to_string(input_h) + "x" + std::to_string(input_w));
    if (attn_channels % 2 != 0)
        throw ConfigError("attn_channels must be even for the rotary pairing");
    if (num_freq < 1 || attn_channels % num_freq != 0)
        throw ConfigError("attn_channels must be divisible by num_freq");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (freq_policy != "zigzag-low" && freq_policy != "explicit")
        throw ConfigError("unknown freq_policy: " + freq_policy);
    if (freq_policy == "explicit" && static_cast<int>(explicit_freqs.size()) != num_freq)
        throw ConfigError("explicit frequency list must have num_freq entries");
    const int fh = input_h / 8, fw = input_w / 8;
    if (block_h > fh || block_w > fw)
        throw ConfigError("block " + std::to_string(block_h) + "x" + std::to_string(block_w) +
                          " exceeds feature map " + std::to_string(fh) + "x" +
                          std::to_string(fw));
    if (gate_reduction < 1 || attn_channels % gate_reduction != 0)
        throw ConfigError("gate_reduction must divide attn_channels");
}

std::string ScsmConfig::canonical_text() const {
    std::ostringstream os;
    os << "input_h=" << input_h << "\ninput_w=" << input_w << "\nin_channels=" << in_channels
       << "\nstage1=" << stage1 << "\nstage2=" << stage2 << "\nstage3=" << stage3
       << "\nchat=" << chat << "\nattn_channels=" << attn_channels
       << "\nnum_classes=" << num_classes << "\nblock_h=" << block_h
       << "\nblock_w=" << block_w << "\nnum_freq=" << num_freq
       << "\nfreq_policy=" << freq_policy << "\ngate_reduction=" << gate_reduction
       << "\ncoeff_o=" << coeff_o << "\ncoeff_d=" << coeff_d << "\ncoeff_a=" << coeff_a
       << "\nlr=" << lr << "\nweight_decay=" << weight_decay
       << "\npoly_power=" << poly_power << "\nmomentum=" << momentum
       << "\nmax_iter=" << max_iter << "\nbatch_size=" << batch_size << "\nseed=" << seed
       << "\nuse_rope=" << use_rope << "\nuse_gate=" << use_gate << "\nuse_smg=" << use_smg
       << "\nrope_identical_angles=" << rope_identical_angles << "\n";
    return os.str();
}

Var cross_entropy(const Var& pred_probs, const smg::ArgmaxMask& truth) {
    if (pred_probs->value.rank() != 3)
        throw DimensionError("cross_entropy: expected {K,H,W} probabilities");
    const int K = pred_probs->value.shape()[0];
    const int H = pred_probs->value.shape()[1], W = pred_probs->value.shape()[2];
    if (truth.height != H || truth.width != W)
        throw DimensionError("cross_entropy: truth mask extents differ from prediction");
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += pred_probs->value.at(k, r, c);
            if (std::abs(s - 1.0) > 1e-6)
                throw NumericError("cross_entropy: prediction at (" + std::to_string(r) + "," +
                                   std::to_string(c) + ") is not normalized (sum=" +
                                   std::to_string(s) + ")");
        }
    // One-hot mask as a constant; loss = -(1/HW) sum y log(yhat).
    Tensor onehot({K, H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) onehot.at(truth.at(r, c), r, c) = 1.0;
    // Clamp-free: probabilities from softmax are strictly positive.
    Var picked = mul(make_const(std::move(onehot)), log_op(pred_probs));
    return scale(sum(picked), -1.0 / (static_cast<double>(H) * W));
}

namespace {

Tensor randn(std::mt19937_64& rng, std::vector<int> shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace

ScsmModel::ScsmModel(ScsmConfig cfg)
    : cfg_(std::move(cfg)),
      basis_(dct::kGateGrid, dct::kGateGrid),
      freqs_(cfg_.freq_policy == "explicit"
                 ? dct::select_frequencies_explicit(cfg_.explicit_freqs, dct::kGateGrid,
                                                    dct::kGateGrid)
                 : dct::select_frequencies_zigzag(cfg_.num_freq, dct::kGateGrid,
                                                  dct::kGateGrid)),
      rope_cfg_(cfg_.rope_identical_angles ? rope::base_angles_identical(cfg_.attn_channels)
                                           : rope::base_angles(cfg_.attn_channels)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    auto conv = [&](const std::string& name, int out, int in, int k) {
        const double std = std::sqrt(2.0 / (in * k * k));
        params_[name + ".w"] = make_param(randn(rng, {out, in, k, k}, std));
        params_[name + ".b"] = make_param(Tensor({out}));
    };
    auto dense = [&](const std::string& name, int in, int out) {
        params_[name] = make_param(randn(rng, {in, out}, std::sqrt(2.0 / in)));
    };

    conv("backbone.s1", cfg_.stage1, cfg_.in_channels, 3);
    conv("backbone.s2", cfg_.stage2, cfg_.stage1, 3);
    conv("backbone.s3", cfg_.stage3, cfg_.stage2, 1);
    conv("backbone.s4", cfg_.chat, cfg_.stage3, 1);
    conv("neck", cfg_.chat, cfg_.chat, 1);

    conv("preclass.1", cfg_.chat, cfg_.chat, 1);
    conv("preclass.2", cfg_.num_classes, cfg_.chat, 1);
    conv("aux", cfg_.num_classes, cfg_.stage3, 1);
    conv("classifier", cfg_.num_classes, cfg_.chat, 1);
    conv("fuse", cfg_.chat, cfg_.chat + cfg_.attn_channels, 1);

    dense("proj.q", cfg_.chat, cfg_.attn_channels);
    dense("proj.k", cfg_.chat, cfg_.attn_channels);
    dense("proj.v", cfg_.chat, cfg_.attn_channels);

    const int hidden = cfg_.attn_channels / cfg_.gate_reduction;
    dense("gate.w1", cfg_.attn_channels, hidden);
    params_["gate.b1"] = make_param(Tensor({hidden}));
    // Zero-initialized output layer starts the gate at 0.5 everywhere.
    params_["gate.w2"] = make_param(Tensor({hidden, cfg_.attn_channels}));
    params_["gate.b2"] = make_param(Tensor({cfg_.attn_channels}));
}

Var ScsmModel::param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("missing parameter: " + name);
    return it->second;
}

ForwardResult ScsmModel::forward(const Tensor& image, bool keep_attention) {
    if (image.rank() != 3 || image.shape()[0] != cfg_.in_channels)
        throw DimensionError("forward: expected {" + std::to_string(cfg_.in_channels) +
                             ",H,W} image, got " + image.shape_str());
    if (image.shape()[1] % 8 != 0 || image.shape()[2] % 8 != 0)
        throw ConfigError("forward: image extents must be divisible by 8");

    Var x = make_const(image);
    Var s1 = silu(conv2d(x, param("backbone.s1.w"), param("backbone.s1.b"), 2, 1));
    Var s2 = silu(conv2d(s1, param("backbone.s2.w"), param("backbone.s2.b"), 2, 1));
    Var s3 = silu(conv2d(s2, param("backbone.s3.w"), param("backbone.s3.b"), 2, 0));
    Var s4 = silu(conv2d(s3, param("backbone.s4.w"), param("backbone.s4.b"), 1, 0));
    Var r = conv2d(s4, param("neck.w"), param("neck.b"), 1, 0);

    // Pre-classification branch (two 1x1 convs).
    Var d_hidden = silu(conv2d(r, param("preclass.1.w"), param("preclass.1.b"), 1, 0));
    Var d = conv2d(d_hidden, param("preclass.2.w"), param("preclass.2.b"), 1, 0);

    const int fh = r->value.shape()[1], fw = r->value.shape()[2];
    smg::BlockLayout layout = smg::make_layout(fh, fw, std::min(cfg_.block_h, fh),
                                               std::min(cfg_.block_w, fw));

    std::vector<Var> r_blocks = smg::split_blocks(r, layout);
    std::vector<Var> s_l_blocks, s_g_blocks;
    if (cfg_.use_smg) {
        Var centers = smg::class_centers(r, d);
        Var s_global = smg::scatter(centers, smg::argmax_mask(d->value));
        s_g_blocks = smg::split_blocks(s_global, layout);
        std::vector<Var> d_blocks = smg::split_blocks(d, layout);
        s_l_blocks = smg::smg_local(r_blocks, d_blocks, centers).s_l;
    } else {
        s_l_blocks = r_blocks;
        s_g_blocks = r_blocks;
    }

    sca::Projections proj{param("proj.q"), param("proj.k"), param("proj.v")};
    dct::GateParams gate{param("gate.w1"), param("gate.b1"), param("gate.w2"),
                         param("gate.b2")};
    sca::ScaOptions opts;
    opts.use_rope = cfg_.use_rope;
    opts.use_gate = cfg_.use_gate;

    ForwardResult out;
    std::vector<sca::ScaBlockResult> diag;
    Var r_a = sca::sca_forward(r_blocks, s_l_blocks, s_g_blocks, layout, proj, gate, freqs_,
                               basis_, rope_cfg_, opts, keep_attention ? &diag : nullptr);
    Var r_o = silu(sca::fuse_output(r_a, r, param("fuse.w"), param("fuse.b")));

    Var logits = conv2d(r_o, param("classifier.w"), param("classifier.b"), 1, 0);
    out.logits_o = bilinear_upsample(logits, 8);
    out.logits_d = bilinear_upsample(d, 8);
    Var aux = conv2d(s3, param("aux.w"), param("aux.b"), 1, 0);
    out.logits_a = bilinear_upsample(aux, 8);
    out.features = r;
    out.attention = std::move(diag);
    return out;
}

LossBundle ScsmModel::total_loss(const ForwardResult& fwd, const smg::ArgmaxMask& truth) {
    Var l_o = cross_entropy(softmax(fwd.logits_o, 0), truth);
    Var l_d = cross_entropy(softmax(fwd.logits_d, 0), truth);
    Var l_a = cross_entropy(softmax(fwd.logits_a, 0), truth);
    LossBundle b;
    b.l_o = l_o->value[0];
    b.l_d = l_d->value[0];
    b.l_a = l_a->value[0];
    b.total_var = add(scale(l_o, cfg_.coeff_o),
                      add(scale(l_d, cfg_.coeff_d), scale(l_a, cfg_.coeff_a)));
    b.total = b.total_var->value[0];
    return b;
}

double ScsmModel::learning_rate(int iter) const {
    const double frac = 1.0 - static_cast<double>(iter) / cfg_.max_iter;
    return cfg_.lr * std::pow(std::max(frac, 0.0), cfg_.poly_power);
}

void ScsmModel::sgd_update(double lr) {
    for (auto& [name, p] : params_) {
        if (p->grad.size() != p->value.size()) continue;
        for (std::int64_t i = 0; i < p->value.size(); ++i)
            p->value[i] -= lr * (p->grad[i] + cfg_.weight_decay * p->value[i]);
        p->grad = Tensor();
    }
}

LossBundle ScsmModel::train_step(const std::vector<const data::SceneSample*>& batch, int iter) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    LossBundle avg;
    Var acc;
    for (const auto* sample : batch) {
        ForwardResult fwd = forward(sample->image);
        LossBundle b = total_loss(fwd, sample->mask);
        avg.l_o += b.l_o;
        avg.l_d += b.l_d;
        avg.l_a += b.l_a;
        acc = acc ? add(acc, b.total_var) : b.total_var;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    Var loss = scale(acc, inv);
    avg.l_o *= inv;
    avg.l_d *= inv;
    avg.l_a *= inv;
    avg.total = loss->value[0];
    avg.total_var = loss;
    if (!std::isfinite(avg.total))
        throw NumericError("train_step: non-finite loss at iteration " + std::to_string(iter));
    backward(loss);
    sgd_update(learning_rate(iter));
    return avg;
}

smg::ArgmaxMask ScsmModel::predict(const Tensor& image) {
    ForwardResult fwd = forward(image);
    return smg::argmax_mask(fwd.logits_o->value);
}

std::map<std::string, Tensor> ScsmModel::state() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, p] : params_) out.emplace(name, p->value);
    return out;
}

void ScsmModel::load_state(const std::map<std::string, Tensor>& state) {
    for (auto& [name, p] : params_) {
        auto it = state.find(name);
        if (it == state.end()) throw FormatError("checkpoint missing parameter " + name);
        if (it->second.shape() != p->value.shape())
            throw DimensionError("checkpoint parameter " + name + " has shape " +
                                 it->second.shape_str() + ", expected " +
                                 p->value.shape_str());
        p->value = it->second;
        p->grad = Tensor();
    }
}

// ---------------------------------------------------------------------------
// Efficiency instrumentation
// ---------------------------------------------------------------------------

std::int64_t head_mac_count(int feat_h, int feat_w, int chat, int c, int k, int block_h,
                            int block_w, int num_freq) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    auto rt = [&](std::vector<int> shape) {
        Tensor t(std::move(shape));
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
        return t;
    };
    Var r = make_const(rt({chat, feat_h, feat_w}));
    Var d = make_const(rt({k, feat_h, feat_w}));
    sca::Projections proj{make_const(rt({chat, c})), make_const(rt({chat, c})),
                          make_const(rt({chat, c}))};
    dct::DctBasis basis(dct::kGateGrid, dct::kGateGrid);
    auto freqs = dct::select_frequencies_zigzag(num_freq, dct::kGateGrid, dct::kGateGrid);
    const int hidden = std::max(1, c / 4);
    dct::GateParams gate{make_const(rt({c, hidden})), make_const(rt({hidden})),
                         make_const(rt({hidden, c})), make_const(rt({c}))};
    auto cfg = rope::base_angles(c);
    auto layout = smg::make_layout(feat_h, feat_w, block_h, block_w);

    reset_mac_count();
    Var centers = smg::class_centers(r, d);
    Var s_global = smg::scatter(centers, smg::argmax_mask(d->value));
    auto r_blocks = smg::split_blocks(r, layout);
    auto d_blocks = smg::split_blocks(d, layout);
    auto s_g_blocks = smg::split_blocks(s_global, layout);
    auto local = smg::smg_local(r_blocks, d_blocks, centers);
    sca::sca_forward(r_blocks, local.s_l, s_g_blocks, layout, proj, gate, freqs, basis, cfg);
    return mac_count();
}

std::int64_t vanilla_mac_count(int feat_h, int feat_w, int chat, int c) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    auto rt = [&](std::vector<int> shape) {
        Tensor t(std::move(shape));
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
        return t;
    };
    Var tokens = make_const(rt({feat_h * feat_w, chat}));
    sca::Projections proj{make_const(rt({chat, c})), make_const(rt({chat, c})),
                          make_const(rt({chat, c}))};
    reset_mac_count();
    sca::vanilla_attention(tokens, proj);
    return mac_count();
}

}  // namespace scsm::model
