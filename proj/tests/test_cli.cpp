#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "voxbag/dataset.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli = VOXBAG_CLI_PATH;

int run(const std::string& args, const std::string& log) {
    const std::string cmd = std::string(cli) + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("full chain through the CLI binary") {
    const auto dir = fs::temp_directory_path() / "voxbag_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log = (dir / "log.txt").string();

    // small config keeps the run to a few seconds
    const auto cfg_path = (dir / "config.json").string();
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "version": 1,
  "seed": 13,
  "preset": 5,
  "input_size": [16, 16, 16],
  "train": {"epochs": 4, "batch_size": 4},
  "bagging": {"n_bags": 8},
  "synth": {"per_class": 10, "extents": [12, 12, 12], "blob_radius": 3.0}
})";
    }

    const std::string base = " --config " + cfg_path;
    CHECK(run("synth" + base + " --out " + (dir / "data").string(), log) == 0);
    const auto manifest = (dir / "data" / "manifest.csv").string();
    CHECK(fs::exists(manifest));

    CHECK(run("train-cnn --manifest " + manifest + base + " --out " + (dir / "model").string(),
              log) == 0);
    const auto bundle = (dir / "model" / "model.vxb").string();
    CHECK(fs::exists(bundle));

    CHECK(run("extract --bundle " + bundle + " --manifest " + manifest + base + " --out " +
                  (dir / "model").string(),
              log) == 0);
    const auto features = (dir / "model" / "features_train.csv").string();
    CHECK(fs::exists(features));

    CHECK(run("train-ensemble --bundle " + bundle + " --features " + features + base, log) == 0);

    CHECK(run("evaluate --bundle " + bundle + " --manifest " + manifest + base + " --out " +
                  (dir / "eval").string(),
              log) == 0);
    CHECK(fs::exists(dir / "eval" / "report.txt"));
    CHECK(slurp(dir / "eval" / "report.txt").find("Ensemble Bagging") != std::string::npos);
    CHECK(slurp(log).find("AUC") != std::string::npos);

    // predict one of the generated volumes
    auto m = voxbag::read_manifest(manifest);
    CHECK(run("predict --bundle " + bundle + " --volume " + m.records.front().path + base, log) == 0);
    const auto pred_out = slurp(log);
    CHECK(pred_out.find("label=") != std::string::npos);
    CHECK(pred_out.find("ensemble") != std::string::npos);

    CHECK(run("cost --m 8 --n 8 --k 8 --kernel-n 3 --kernel-t 3 --channels 1 --filters 4 --bags 50"
              " --classifiers 50",
              log) == 0);
    CHECK(slurp(log).find("55296") != std::string::npos);
    CHECK(slurp(log).find("2500") != std::string::npos);
}

TEST_CASE("CLI exit codes distinguish failure classes") {
    const auto dir = fs::temp_directory_path() / "voxbag_cli_err";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log = (dir / "log.txt").string();

    // missing manifest: data error
    CHECK(run("train-cnn --manifest /nonexistent/m.csv --out " + dir.string(), log) == 3);

    // bad config: config error
    const auto bad_cfg = (dir / "bad.json").string();
    {
        std::ofstream f(bad_cfg);
        f << R"({"version": 1, "no_such_key": true})";
    }
    CHECK(run("synth --config " + bad_cfg + " --out " + dir.string(), log) == 2);

    // corrupt bundle: persistence error
    const auto junk = (dir / "junk.vxb").string();
    {
        std::ofstream f(junk, std::ios::binary);
        f << "not a bundle at all";
    }
    CHECK(run("predict --bundle " + junk + " --volume whatever.nii", log) == 5);

    // unknown flag: CLI parser error
    CHECK(run("synth --definitely-not-a-flag", log) != 0);
}
