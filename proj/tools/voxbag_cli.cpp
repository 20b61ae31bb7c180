// voxbag: volumetric MRI classification pipeline
//
// Subcommands cover the full chain:
//   synth -> train-cnn -> extract -> train-ensemble -> evaluate
// plus single-volume predict and the cost model. All stages are
// deterministic under --seed; exit codes: 0 ok, 2 config, 3 data,
// 4 numeric failure, 5 persistence.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "voxbag/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> preset;
    std::optional<std::string> mode;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config JSON");
    cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
    cmd->add_option("--preset", opts.preset, "network preset 1..5 (overrides config)")
        ->check(CLI::Range(1, 5));
    cmd->add_option("--mode", opts.mode, "2d or 3d (overrides config)")
        ->check(CLI::IsMember({"2d", "3d"}));
    cmd->add_option("--out", opts.out_dir, "output directory");
}

voxbag::PipelineConfig resolve_config(const CommonOpts& opts) {
    voxbag::PipelineConfig cfg;
    if (!opts.config_path.empty()) cfg = voxbag::load_config(opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.train.seed = *opts.seed;
        cfg.bagging.seed = *opts.seed;
        cfg.synth.seed = *opts.seed;
    }
    if (opts.preset) cfg.preset = *opts.preset;
    if (opts.mode) cfg.mode = *opts.mode == "2d" ? voxbag::DimsMode::two_d : voxbag::DimsMode::three_d;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxbag: 3D-CNN + bagging classification of volumetric MRI"};
    app.require_subcommand(1);

    CommonOpts synth_opts, train_opts, extract_opts, ensemble_opts, eval_opts, predict_opts;

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    add_common(synth, synth_opts);

    auto* train_cnn = app.add_subcommand("train-cnn", "train the CNN on the 70:30 train partition");
    std::string train_manifest;
    train_cnn->add_option("--manifest", train_manifest, "dataset manifest CSV")->required();
    add_common(train_cnn, train_opts);

    auto* extract = app.add_subcommand("extract", "write FCL features for a partition to CSV");
    std::string extract_bundle, extract_manifest, extract_split = "train";
    extract->add_option("--bundle", extract_bundle, "model bundle")->required();
    extract->add_option("--manifest", extract_manifest, "dataset manifest CSV")->required();
    extract->add_option("--split", extract_split, "train, test or all")
        ->check(CLI::IsMember({"train", "test", "all"}));
    add_common(extract, extract_opts);

    auto* train_ens = app.add_subcommand("train-ensemble", "fit the bagging ensemble on features");
    std::string ens_bundle, ens_features;
    train_ens->add_option("--bundle", ens_bundle, "model bundle")->required();
    train_ens->add_option("--features", ens_features, "feature CSV from extract")->required();
    add_common(train_ens, ensemble_opts);

    auto* evaluate = app.add_subcommand("evaluate", "score the test partition and write reports");
    std::string eval_bundle, eval_manifest;
    bool with_baselines = false;
    evaluate->add_option("--bundle", eval_bundle, "model bundle")->required();
    evaluate->add_option("--manifest", eval_manifest, "dataset manifest CSV")->required();
    evaluate->add_flag("--with-baselines", with_baselines,
                       "also fit and report the five baseline classifiers");
    add_common(evaluate, eval_opts);

    auto* predict = app.add_subcommand("predict", "classify one NIfTI volume");
    std::string pred_bundle, pred_volume;
    predict->add_option("--bundle", pred_bundle, "model bundle")->required();
    predict->add_option("--volume", pred_volume, "NIfTI volume path")->required();
    add_common(predict, predict_opts);

    auto* cost = app.add_subcommand("cost", "multiply-accumulate cost model");
    std::uint64_t cm = 1, cn = 1, ck = 1, ckn = 1, ckt = 1, cc = 1, cw = 1, cb = 1, cd = 1;
    std::optional<int> cost_preset;
    std::optional<std::string> cost_mode;
    std::vector<std::uint64_t> cost_input;
    cost->add_option("--m", cm, "image extent M");
    cost->add_option("--n", cn, "image extent N");
    cost->add_option("--k", ck, "image extent K");
    cost->add_option("--kernel-n", ckn, "spatial kernel extent n");
    cost->add_option("--kernel-t", ckt, "temporal kernel extent t");
    cost->add_option("--channels", cc, "input channels c");
    cost->add_option("--filters", cw, "filter count W");
    cost->add_option("--bags", cb, "bag count B");
    cost->add_option("--classifiers", cd, "classifier count D");
    cost->add_option("--preset", cost_preset, "report the per-layer breakdown of a preset")
        ->check(CLI::Range(1, 5));
    cost->add_option("--mode", cost_mode, "2d or 3d for --preset")
        ->check(CLI::IsMember({"2d", "3d"}));
    cost->add_option("--input", cost_input, "input extents d h w for --preset")->expected(3);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            auto cfg = resolve_config(synth_opts);
            const auto manifest = voxbag::cmd_synth(cfg, synth_opts.out_dir);
            std::cout << "wrote " << 2 * cfg.synth.per_class << " volumes and " << manifest << "\n";
        } else if (*train_cnn) {
            auto cfg = resolve_config(train_opts);
            auto result = voxbag::cmd_train_cnn(cfg, train_manifest, train_opts.out_dir);
            const auto& last = result.trace.back();
            std::cout << "trained " << result.trace.size() << " epochs, final loss " << last.loss
                      << ", train accuracy " << last.accuracy << "\n";
            std::cout << "bundle: " << result.bundle_path << "\n";
            std::cout << "trace:  " << result.trace_path << "\n";
        } else if (*extract) {
            auto cfg = resolve_config(extract_opts);
            const auto select = extract_split == "train"  ? voxbag::SplitSelect::train
                                : extract_split == "test" ? voxbag::SplitSelect::test
                                                          : voxbag::SplitSelect::all;
            const auto out_path = (std::filesystem::path(extract_opts.out_dir) /
                                   ("features_" + extract_split + ".csv"))
                                      .string();
            voxbag::cmd_extract(extract_bundle, extract_manifest, cfg, select, out_path);
            std::cout << "features: " << out_path << "\n";
        } else if (*train_ens) {
            auto cfg = resolve_config(ensemble_opts);
            voxbag::cmd_train_ensemble(ens_bundle, ens_features, cfg, ens_bundle);
            std::cout << "ensemble fitted (" << cfg.bagging.n_bags << " bags) and saved to "
                      << ens_bundle << "\n";
        } else if (*evaluate) {
            auto cfg = resolve_config(eval_opts);
            auto out = voxbag::cmd_evaluate(eval_bundle, eval_manifest, cfg, eval_opts.out_dir,
                                            with_baselines);
            std::cout << out.report_txt;
            for (const auto& [name, roc] : out.rocs)
                std::cout << "AUC " << name << ": " << roc.auc << "\n";
            std::cout << "reports written to " << eval_opts.out_dir << "\n";
        } else if (*predict) {
            auto cfg = resolve_config(predict_opts);
            auto pred = voxbag::cmd_predict(pred_bundle, pred_volume, cfg);
            std::cout << "label=" << (pred.label == 1 ? "SCZ" : "CN") << " p_cn=" << pred.proba[0]
                      << " p_scz=" << pred.proba[1]
                      << (pred.via_ensemble ? " (ensemble)" : " (cnn softmax)") << "\n";
        } else if (*cost) {
            if (cost_preset) {
                const auto mode = cost_mode && *cost_mode == "2d" ? voxbag::DimsMode::two_d
                                                                  : voxbag::DimsMode::three_d;
                std::array<std::size_t, 4> ishape{1, 32, 32, 32};
                if (!cost_input.empty())
                    ishape = {1, cost_input[0], cost_input[1], cost_input[2]};
                if (mode == voxbag::DimsMode::two_d) ishape[1] = 1;
                auto net = voxbag::network_preset(*cost_preset, mode, ishape);
                std::cout << voxbag::render_cost(voxbag::network_cost(net, cb, cd));
            } else {
                voxbag::CostParams p;
                p.m = cm;
                p.n_dim = cn;
                p.k = ck;
                p.kernel_n = ckn;
                p.kernel_t = ckt;
                p.channels = cc;
                p.filters = cw;
                p.bags = cb;
                p.classifiers = cd;
                std::cout << "conv MACs: " << voxbag::conv_cost(p) << "\n";
                std::cout << "ensemble (B*D): " << voxbag::ensemble_cost(p) << "\n";
                std::cout << "total: " << voxbag::conv_cost(p) + voxbag::ensemble_cost(p) << "\n";
            }
        }
    } catch (const voxbag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
