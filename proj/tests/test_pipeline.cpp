#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "voxbag/pipeline.hpp"

using namespace voxbag;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig small_config(std::uint64_t seed) {
    PipelineConfig cfg;
    cfg.seed = seed;
    cfg.input_size = {16, 16, 16};
    cfg.preset = 5;  // two conv blocks: enough for 16^3 and fast
    cfg.train.epochs = 5;
    cfg.train.batch_size = 4;
    cfg.bagging.n_bags = 10;
    cfg.synth.per_class = 12;
    cfg.synth.extents = {12, 12, 12};
    cfg.synth.blob_radius = 3.0;
    cfg.synth.seed = seed;
    cfg.train.seed = seed;
    cfg.bagging.seed = seed;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config parsing: defaults, overrides, unknown keys, version") {
    auto cfg = parse_config(nlohmann::json{{"version", 1}});
    CHECK(cfg.split_fraction == 0.70);
    CHECK(cfg.preset == 1);
    CHECK(cfg.input_size == std::array<std::size_t, 3>{32, 32, 32});
    CHECK(cfg.train.learning_rate == 0.01);
    CHECK(cfg.bagging.n_bags == 50);

    auto ov = parse_config(nlohmann::json{{"version", 1},
                                          {"seed", 9},
                                          {"mode", "2d"},
                                          {"preset", 3},
                                          {"train", {{"epochs", 7}}},
                                          {"bagging", {{"n_bags", 21}}}});
    CHECK(ov.seed == 9);
    CHECK(ov.mode == DimsMode::two_d);
    CHECK(ov.preset == 3);
    CHECK(ov.train.epochs == 7);
    CHECK(ov.bagging.n_bags == 21);
    CHECK(ov.train.seed == 9);  // master seed propagates

    CHECK_THROWS_WITH_AS(parse_config(nlohmann::json{{"version", 1}, {"typo_key", 1}}),
                         doctest::Contains("unknown key"), Error);
    CHECK_THROWS_WITH_AS(parse_config(nlohmann::json{{"version", 2}}),
                         doctest::Contains("version"), Error);
    CHECK_THROWS_WITH_AS(parse_config(nlohmann::json{{"seed", 3}}), doctest::Contains("version"),
                         Error);
    CHECK_THROWS_AS(parse_config(nlohmann::json{{"version", 1}, {"split_fraction", 1.5}}), Error);
}

TEST_CASE("end-to-end 3D chain: synth -> train -> extract -> ensemble -> evaluate") {
    const auto dir = fresh_dir("voxbag_pipe3d");
    auto cfg = small_config(5);

    const auto manifest_path = cmd_synth(cfg, (dir / "data").string());
    CHECK(fs::exists(manifest_path));

    auto trained = cmd_train_cnn(cfg, manifest_path, (dir / "model").string());
    CHECK(fs::exists(trained.bundle_path));
    CHECK(fs::exists(trained.trace_path));
    REQUIRE(trained.trace.size() == 5);

    const auto feats_path = (dir / "features_train.csv").string();
    cmd_extract(trained.bundle_path, manifest_path, cfg, SplitSelect::train, feats_path);
    auto table = read_features_csv(feats_path);
    // round(0.7*12)=8 per class -> 16 train subjects
    CHECK(table.subject_ids.size() == 16);
    CHECK(table.features.extent(1) == 128);

    cmd_train_ensemble(trained.bundle_path, feats_path, cfg, trained.bundle_path);
    auto bundle = load_bundle(trained.bundle_path);
    CHECK(bundle.ensemble.has_value());
    CHECK(bundle.ensemble->model.trees.size() == 10);

    auto out = cmd_evaluate(trained.bundle_path, manifest_path, cfg, (dir / "eval").string(), false);
    REQUIRE(out.reports.size() == 1);
    CHECK(out.reports[0].name == "Ensemble Bagging");
    CHECK(out.confusions.at("Ensemble Bagging").total() == 8);  // 4 test subjects per class
    CHECK(fs::exists(dir / "eval" / "report.txt"));
    CHECK(fs::exists(dir / "eval" / "report.csv"));
    CHECK(fs::exists(dir / "eval" / "report.json"));
    CHECK(fs::exists(dir / "eval" / "roc_ensemble_bagging.csv"));

    // predict on a training volume of the overfit model recovers its label
    // with high confidence
    auto manifest = read_manifest(manifest_path);
    auto [train_part, test_part] = split_dataset(manifest, cfg.split_fraction, cfg.seed);
    const auto& train_rec = train_part.records.front();
    auto pred = cmd_predict(trained.bundle_path, train_rec.path, cfg);
    CHECK(pred.via_ensemble);
    CHECK(std::abs(pred.proba[0] + pred.proba[1] - 1.0) <= 1e-9);
    CHECK(pred.label == label_index(train_rec.label));
    CHECK(pred.proba[static_cast<std::size_t>(pred.label)] > 0.9);
}

TEST_CASE("2D chain shares the manifest and aggregates slices per subject") {
    const auto dir = fresh_dir("voxbag_pipe2d");
    auto cfg = small_config(6);
    cfg.mode = DimsMode::two_d;
    cfg.slices_per_subject = 5;

    const auto manifest_path = cmd_synth(cfg, (dir / "data").string());
    auto trained = cmd_train_cnn(cfg, manifest_path, (dir / "model").string());

    const auto feats_path = (dir / "features_train.csv").string();
    cmd_extract(trained.bundle_path, manifest_path, cfg, SplitSelect::train, feats_path);
    auto table = read_features_csv(feats_path);
    CHECK(table.subject_ids.size() == 16 * 5);  // five slice rows per train subject
    CHECK(table.subject_ids[0] == table.subject_ids[4]);

    cmd_train_ensemble(trained.bundle_path, feats_path, cfg, trained.bundle_path);
    auto out = cmd_evaluate(trained.bundle_path, manifest_path, cfg, (dir / "eval").string(), false);
    // per-subject aggregation: the confusion matrix counts subjects, not slices
    CHECK(out.confusions.at("Ensemble Bagging").total() == 8);
}

TEST_CASE("evaluate with baselines renders the six-row comparison") {
    const auto dir = fresh_dir("voxbag_pipebase");
    auto cfg = small_config(7);
    cfg.baselines.rvfl_hidden = 32;
    cfg.baselines.svm_epochs = 10;

    const auto manifest_path = cmd_synth(cfg, (dir / "data").string());
    auto trained = cmd_train_cnn(cfg, manifest_path, (dir / "model").string());
    const auto feats_path = (dir / "f.csv").string();
    cmd_extract(trained.bundle_path, manifest_path, cfg, SplitSelect::train, feats_path);
    cmd_train_ensemble(trained.bundle_path, feats_path, cfg, trained.bundle_path);

    auto out = cmd_evaluate(trained.bundle_path, manifest_path, cfg, (dir / "eval").string(), true);
    REQUIRE(out.reports.size() == 6);
    CHECK(out.reports[0].name == "Ensemble Bagging");
    for (const char* name : {"SVM", "Naive Bayes", "K-Nearest Neighbour", "Random Forest",
                             "Standard RVFL"})
        CHECK(out.rocs.count(name) == 1);
    CHECK(fs::exists(dir / "eval" / "roc_standard_rvfl.csv"));
    // every row keeps probabilities consistent with its confusion matrix
    for (const auto& nr : out.reports) {
        const auto& cm = out.confusions.at(nr.name);
        CHECK(cm.total() == 8);
    }
}

TEST_CASE("identical config and seed reproduce byte-identical artifacts") {
    const auto dir_a = fresh_dir("voxbag_det_a");
    const auto dir_b = fresh_dir("voxbag_det_b");
    auto cfg = small_config(11);

    for (const auto& dir : {dir_a, dir_b}) {
        const auto manifest_path = cmd_synth(cfg, (dir / "data").string());
        auto trained = cmd_train_cnn(cfg, manifest_path, (dir / "model").string());
        const auto feats = (dir / "f.csv").string();
        cmd_extract(trained.bundle_path, manifest_path, cfg, SplitSelect::train, feats);
        cmd_train_ensemble(trained.bundle_path, feats, cfg, trained.bundle_path);
        cmd_evaluate(trained.bundle_path, manifest_path, cfg, (dir / "eval").string(), false);
    }

    for (const char* rel :
         {"data/manifest.csv", "model/model.vxb", "model/train_trace.csv", "f.csv",
          "eval/report.txt", "eval/report.csv", "eval/report.json",
          "eval/roc_ensemble_bagging.csv"}) {
        CHECK(slurp(dir_a / rel) == slurp(dir_b / rel));
    }
}

TEST_CASE("stage errors carry distinct exit codes") {
    const auto dir = fresh_dir("voxbag_pipe_err");
    auto cfg = small_config(8);

    // missing manifest -> data error (3)
    try {
        cmd_train_cnn(cfg, (dir / "nope.csv").string(), (dir / "m").string());
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.exit_code() == 3);
    }

    // evaluate before train-ensemble -> data error
    const auto manifest_path = cmd_synth(cfg, (dir / "data").string());
    auto trained = cmd_train_cnn(cfg, manifest_path, (dir / "model").string());
    try {
        cmd_evaluate(trained.bundle_path, manifest_path, cfg, (dir / "eval").string(), false);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.exit_code() == 3);
        CHECK(std::string(e.what()).find("ensemble") != std::string::npos);
    }

    // feature width mismatch -> data error
    const auto bad_feats = (dir / "bad.csv").string();
    {
        std::ofstream f(bad_feats);
        f << "subject_id,label,f0,f1\n";
        f << "a,CN,0.1,0.2\n";
        f << "b,SCZ,0.3,0.4\n";
    }
    try {
        cmd_train_ensemble(trained.bundle_path, bad_feats, cfg, trained.bundle_path);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.exit_code() == 3);
        CHECK(std::string(e.what()).find("width") != std::string::npos);
    }
}
