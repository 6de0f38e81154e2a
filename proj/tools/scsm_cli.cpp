// scsm — train/evaluate/inspect the scene-coupling segmentation head on
// synthetic scenes.

#include "scsm/data.hpp"
#include "scsm/gradcheck.hpp"
#include "scsm/metrics.hpp"
#include "scsm/model.hpp"
#include "scsm/runconfig.hpp"
#include "scsm/train.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace scsm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<int> seed;
    std::optional<int> max_iter;
};

cli::RunConfig resolve_config(const CommonOpts& opts) {
    cli::RunConfig cfg = opts.config_path.empty() ? cli::RunConfig::defaults()
                                                  : cli::load_run_config(opts.config_path);
    if (opts.seed) cfg.model.seed = static_cast<std::uint64_t>(*opts.seed);
    if (opts.max_iter) cfg.model.max_iter = *opts.max_iter;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    cfg.model.validate();
    return cfg;
}

int cmd_train(const CommonOpts& opts) {
    cli::RunConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);

    model::ScsmModel net(cfg.model);
    auto train_set = train::train_split(cfg);
    auto val_set = train::val_split(cfg);

    std::ofstream csv(fs::path(cfg.out_dir) / "loss.csv");
    if (!csv) throw FormatError("cannot open loss.csv under " + cfg.out_dir);
    auto res = train::run_training(net, cfg, train_set, val_set, &csv);

    const std::uint32_t digest = data::fnv1a(cfg.model.canonical_text());
    data::write_checkpoint((fs::path(cfg.out_dir) / "checkpoint.sck1").string(), digest,
                           net.state());

    metrics::ConfusionMatrix cm(cfg.model.num_classes);
    train::evaluate(net, val_set, &cm);
    std::ofstream mf(fs::path(cfg.out_dir) / "metrics.txt");
    mf << metrics::report(cm);

    std::cout << "initial_loss=" << res.initial_loss << " final_loss=" << res.final_loss
              << " val_miou=" << res.val_summary.miou << "\n";
    std::cout << "checkpoint=" << (fs::path(cfg.out_dir) / "checkpoint.sck1").string() << "\n";
    return kExitOk;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint,
             const std::string& manifest) {
    cli::RunConfig cfg = resolve_config(opts);
    model::ScsmModel net(cfg.model);
    net.load_state(data::read_checkpoint(checkpoint));

    std::ifstream mf(manifest);
    if (!mf) throw FormatError("cannot open manifest " + manifest);
    metrics::ConfusionMatrix cm(cfg.model.num_classes);
    std::string image_path, mask_path;
    int count = 0;
    while (mf >> image_path >> mask_path) {
        Tensor image = data::read_tensor(image_path);
        smg::ArgmaxMask truth = data::read_mask(mask_path);
        cm.accumulate(net.predict(image), truth);
        ++count;
    }
    if (count == 0) throw FormatError("manifest " + manifest + " lists no samples");
    std::cout << metrics::report(cm);
    return kExitOk;
}

int cmd_gradcheck(const std::string& selector, double threshold) {
    auto results = gradcheck::run(selector);
    bool ok = true;
    for (const auto& r : results) {
        const bool pass = r.worst_error < threshold;
        ok = ok && pass;
        std::cout << r.name << ": worst_rel_err=" << r.worst_error << " "
                  << (pass ? "PASS" : "FAIL") << "\n";
    }
    return ok ? kExitOk : kExitNumeric;
}

int cmd_gen_data(const CommonOpts& opts, int count) {
    cli::RunConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    auto samples = data::generate_dataset(cfg.model.seed, count, cfg.model.input_h,
                                          cfg.model.input_w);
    std::ofstream manifest(fs::path(cfg.out_dir) / "manifest.txt");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto img = fs::path(cfg.out_dir) / ("sample" + std::to_string(i) + ".sct1");
        const auto msk = fs::path(cfg.out_dir) / ("sample" + std::to_string(i) + ".pgm");
        data::write_tensor(img.string(), samples[i].image);
        data::write_mask(msk.string(), samples[i].mask);
        manifest << img.string() << " " << msk.string() << "\n";
    }
    std::cout << "wrote " << samples.size() << " samples and manifest to " << cfg.out_dir
              << "\n";
    return kExitOk;
}

int cmd_dump_attn(const CommonOpts& opts, const std::string& checkpoint) {
    cli::RunConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    model::ScsmModel net(cfg.model);
    if (!checkpoint.empty()) net.load_state(data::read_checkpoint(checkpoint));
    data::SceneSample sample = data::generate_scene(cfg.model.seed, data::SceneMode::Urban,
                                                    cfg.model.input_h, cfg.model.input_w);
    auto fwd = net.forward(sample.image, /*keep_attention=*/true);
    for (std::size_t b = 0; b < fwd.attention.size(); ++b) {
        const auto base = fs::path(cfg.out_dir) / ("block" + std::to_string(b));
        data::write_tensor(base.string() + ".affinity.sct1", fwd.attention[b].affinity->value);
        data::write_tensor(base.string() + ".weights.sct1", fwd.attention[b].weights->value);
    }
    std::cout << "dumped " << fwd.attention.size() << " attention blocks to " << cfg.out_dir
              << "\n";
    return kExitOk;
}

int cmd_ablate(const CommonOpts& opts, const std::string& axis) {
    cli::RunConfig base = resolve_config(opts);
    struct Variant {
        std::string label;
        cli::RunConfig cfg;
    };
    std::vector<Variant> variants;
    auto with = [&](const std::string& label, auto&& edit) {
        cli::RunConfig c = base;
        edit(c.model);
        variants.push_back({label, std::move(c)});
    };
    if (axis == "loss") {
        for (double w : {0.4, 0.8, 1.0})
            with("coeff_d=" + std::to_string(w).substr(0, 3),
                 [w](model::ScsmConfig& m) { m.coeff_d = w; });
    } else if (axis == "angles") {
        with("different", [](model::ScsmConfig&) {});
        with("identical", [](model::ScsmConfig& m) { m.rope_identical_angles = true; });
    } else if (axis == "rope") {
        with("rope+", [](model::ScsmConfig&) {});
        with("no-rope", [](model::ScsmConfig& m) { m.use_rope = false; });
    } else if (axis == "frequency") {
        for (int m : {1, 4, 16})
            with("M=" + std::to_string(m), [m](model::ScsmConfig& c) { c.num_freq = m; });
    } else if (axis == "block") {
        const int fh = base.model.input_h / 8;
        for (int b : {2, 4, 8}) {
            if (b > fh) continue;
            with("block=" + std::to_string(b), [b](model::ScsmConfig& c) {
                c.block_h = b;
                c.block_w = b;
            });
        }
    } else {
        throw ConfigError("unknown ablation axis: " + axis);
    }

    std::cout << "# desk-scale ablation (relative ordering only; absolute values are\n"
                 "# not comparable across training setups)\n";
    std::cout << "axis=" << axis << " seed=" << base.model.seed << " max_iter="
              << base.model.max_iter << "\n";
    for (auto& v : variants) {
        model::ScsmModel net(v.cfg.model);
        auto train_set = train::train_split(v.cfg);
        auto val_set = train::val_split(v.cfg);
        auto res = train::run_training(net, v.cfg, train_set, val_set);
        std::cout << v.label << ": val_miou=" << res.val_summary.miou
                  << " val_oa=" << res.val_summary.oa << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SCSM scene-coupling segmentation toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string checkpoint, manifest, selector = "all", axis;
    double threshold = 1e-5;
    int gen_count = 16;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "key=value config file");
        sub->add_option("--seed", opts.seed, "override run seed");
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--max-iter", opts.max_iter, "override iteration count");
    };

    auto* train_cmd = app.add_subcommand("train", "train on synthetic scenes");
    add_common(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint over a manifest");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", manifest, "manifest of image/mask path pairs")
        ->required();

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference verification");
    grad_cmd->add_option("selector", selector, "rope|dct|smg|sca|model|all");
    grad_cmd->add_option("--threshold", threshold, "pass bound on worst relative error");

    auto* ablate_cmd = app.add_subcommand("ablate", "train configured variants and compare");
    add_common(ablate_cmd);
    ablate_cmd->add_option("axis", axis, "frequency|block|angles|rope|loss")->required();

    auto* gen_cmd = app.add_subcommand("gen-data", "write synthetic samples and a manifest");
    add_common(gen_cmd);
    gen_cmd->add_option("--count", gen_count, "number of samples");

    auto* dump_cmd = app.add_subcommand("dump-attn", "dump per-block attention tensors");
    add_common(dump_cmd);
    dump_cmd->add_option("--checkpoint", checkpoint, "optional checkpoint file");

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return cmd_train(opts);
        if (eval_cmd->parsed()) return cmd_eval(opts, checkpoint, manifest);
        if (grad_cmd->parsed()) return cmd_gradcheck(selector, threshold);
        if (ablate_cmd->parsed()) return cmd_ablate(opts, axis);
        if (gen_cmd->parsed()) return cmd_gen_data(opts, gen_count);
        if (dump_cmd->parsed()) return cmd_dump_attn(opts, checkpoint);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const DimensionError& e) {
        std::cerr << "compat error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitConfig;
}
