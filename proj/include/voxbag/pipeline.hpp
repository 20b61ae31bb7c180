#ifndef VOXBAG_PIPELINE_HPP_
#define VOXBAG_PIPELINE_HPP_

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbag/bagging.hpp"
#include "voxbag/baselines.hpp"
#include "voxbag/bundle.hpp"
#include "voxbag/cnn/cost.hpp"
#include "voxbag/cnn/network.hpp"
#include "voxbag/cnn/train.hpp"
#include "voxbag/dataset.hpp"
#include "voxbag/error.hpp"
#include "voxbag/metrics.hpp"
#include "voxbag/nifti.hpp"
#include "voxbag/preprocess.hpp"
#include "voxbag/synth.hpp"

namespace voxbag {

struct BaselineConfig {
    std::size_t knn_k = 5;
    std::size_t rvfl_hidden = 256;
    double rvfl_lambda = 0.1;
    double svm_lambda = 0.01;
    std::size_t svm_epochs = 30;
};

/// Everything a pipeline run needs. All stages derive the 70:30 split and
/// their rng streams from the one master seed, so the stage chain is
/// reproducible end to end.
struct PipelineConfig {
    std::array<std::size_t, 3> input_size{32, 32, 32};  // depth, height, width
    int preset = 1;
    DimsMode mode = DimsMode::three_d;
    std::size_t slices_per_subject = 5;
    double split_fraction = 0.70;
    std::uint64_t seed = 0;
    TrainConfig train;
    BaggingConfig bagging;
    BaselineConfig baselines;
    SynthConfig synth;
};

namespace pipeline_detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw Error(Errc::config, "config: unknown key '" + scope + it.key() + "'");
}

}  // namespace pipeline_detail

/// JSON config document; a `version` field is required and unknown keys are
/// rejected at every level. Absent keys keep their defaults.
inline PipelineConfig parse_config(const nlohmann::json& j) {
    using pipeline_detail::reject_unknown_keys;
    PipelineConfig cfg;
    reject_unknown_keys(j, {"version", "seed", "split_fraction", "input_size", "preset", "mode",
                            "slices_per_subject", "train", "bagging", "baselines", "synth"},
                        "");
    if (!j.contains("version")) throw Error(Errc::config, "config: missing 'version' field");
    if (j.at("version").get<int>() != 1)
        throw Error(Errc::config, "config: unsupported version " + j.at("version").dump());

    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("split_fraction")) cfg.split_fraction = j.at("split_fraction").get<double>();
    if (!(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0))
        throw Error(Errc::config, "config: split_fraction must be in (0,1)");
    if (j.contains("input_size")) {
        const auto v = j.at("input_size").get<std::vector<std::size_t>>();
        if (v.size() != 3) throw Error(Errc::config, "config: input_size must have 3 extents");
        std::copy(v.begin(), v.end(), cfg.input_size.begin());
    }
    if (j.contains("preset")) cfg.preset = j.at("preset").get<int>();
    if (cfg.preset < 1 || cfg.preset > 5) throw Error(Errc::config, "config: preset must be in 1..5");
    if (j.contains("mode")) {
        const auto m = j.at("mode").get<std::string>();
        if (m == "2d")
            cfg.mode = DimsMode::two_d;
        else if (m == "3d")
            cfg.mode = DimsMode::three_d;
        else
            throw Error(Errc::config, "config: mode must be '2d' or '3d'");
    }
    if (j.contains("slices_per_subject"))
        cfg.slices_per_subject = j.at("slices_per_subject").get<std::size_t>();

    if (j.contains("train")) {
        const auto& t = j.at("train");
        reject_unknown_keys(t, {"learning_rate", "momentum", "batch_size", "epochs"}, "train.");
        if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("momentum")) cfg.train.momentum = t.at("momentum").get<double>();
        if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<std::size_t>();
    }
    if (j.contains("bagging")) {
        const auto& b = j.at("bagging");
        reject_unknown_keys(b, {"n_bags", "max_depth", "min_samples_split", "min_impurity_decrease"},
                            "bagging.");
        if (b.contains("n_bags")) cfg.bagging.n_bags = b.at("n_bags").get<std::size_t>();
        if (b.contains("max_depth")) cfg.bagging.tree.max_depth = b.at("max_depth").get<std::size_t>();
        if (b.contains("min_samples_split"))
            cfg.bagging.tree.min_samples_split = b.at("min_samples_split").get<std::size_t>();
        if (b.contains("min_impurity_decrease"))
            cfg.bagging.tree.min_impurity_decrease = b.at("min_impurity_decrease").get<double>();
    }
    if (j.contains("baselines")) {
        const auto& b = j.at("baselines");
        reject_unknown_keys(b, {"knn_k", "rvfl_hidden", "rvfl_lambda", "svm_lambda", "svm_epochs"},
                            "baselines.");
        if (b.contains("knn_k")) cfg.baselines.knn_k = b.at("knn_k").get<std::size_t>();
        if (b.contains("rvfl_hidden")) cfg.baselines.rvfl_hidden = b.at("rvfl_hidden").get<std::size_t>();
        if (b.contains("rvfl_lambda")) cfg.baselines.rvfl_lambda = b.at("rvfl_lambda").get<double>();
        if (b.contains("svm_lambda")) cfg.baselines.svm_lambda = b.at("svm_lambda").get<double>();
        if (b.contains("svm_epochs")) cfg.baselines.svm_epochs = b.at("svm_epochs").get<std::size_t>();
    }
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        reject_unknown_keys(
            s, {"per_class", "extents", "noise_sigma", "blob_amplitude", "blob_radius"}, "synth.");
        if (s.contains("per_class")) cfg.synth.per_class = s.at("per_class").get<std::size_t>();
        if (s.contains("extents")) {
            const auto v = s.at("extents").get<std::vector<std::size_t>>();
            if (v.size() != 3) throw Error(Errc::config, "config: synth.extents must have 3 extents");
            std::copy(v.begin(), v.end(), cfg.synth.extents.begin());
        }
        if (s.contains("noise_sigma")) cfg.synth.noise_sigma = s.at("noise_sigma").get<double>();
        if (s.contains("blob_amplitude"))
            cfg.synth.blob_amplitude = s.at("blob_amplitude").get<double>();
        if (s.contains("blob_radius")) cfg.synth.blob_radius = s.at("blob_radius").get<double>();
    }
    cfg.train.seed = cfg.seed;
    cfg.bagging.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::config, "config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::config, std::string("config: bad JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---- sample preparation -------------------------------------------------------

/// Normalized, resampled network inputs for one manifest record.
/// 3D mode: one rank-4 sample per subject. 2D mode: slices_per_subject
/// samples, each a depth-1 volume, all carrying the subject's label.
inline std::vector<LabeledSample> prepare_record(const ManifestRecord& rec,
                                                 const PipelineConfig& cfg) {
    auto [hdr, volume] = read_nifti(rec.path);
    Volume norm = intensity_normalize(volume).volume;

    std::vector<LabeledSample> out;
    if (cfg.mode == DimsMode::three_d) {
        Volume sized = resample_trilinear(norm, cfg.input_size[0], cfg.input_size[1], cfg.input_size[2]);
        LabeledSample s;
        s.features = reshape(sized.data, Shape{1, cfg.input_size[0], cfg.input_size[1], cfg.input_size[2]});
        s.label = label_index(rec.label);
        s.subject_id = rec.subject_id;
        out.push_back(std::move(s));
    } else {
        auto slices = extract_axial_slices(norm, cfg.slices_per_subject);
        for (auto& plane : slices) {
            Volume v;
            v.data = reshape(plane, Shape{1, plane.extent(0), plane.extent(1)});
            v.spacing_mm = norm.spacing_mm;
            Volume sized = resample_trilinear(v, 1, cfg.input_size[1], cfg.input_size[2]);
            LabeledSample s;
            s.features = reshape(sized.data, Shape{1, 1, cfg.input_size[1], cfg.input_size[2]});
            s.label = label_index(rec.label);
            s.subject_id = rec.subject_id;
            out.push_back(std::move(s));
        }
    }
    return out;
}

inline std::vector<LabeledSample> prepare_manifest(const DatasetManifest& manifest,
                                                   const PipelineConfig& cfg) {
    std::vector<LabeledSample> samples;
    for (const auto& rec : manifest.records) {
        auto per_record = prepare_record(rec, cfg);
        for (auto& s : per_record) samples.push_back(std::move(s));
    }
    return samples;
}

inline std::array<std::size_t, 4> network_input_shape(const PipelineConfig& cfg) {
    if (cfg.mode == DimsMode::two_d) return {1, 1, cfg.input_size[1], cfg.input_size[2]};
    return {1, cfg.input_size[0], cfg.input_size[1], cfg.input_size[2]};
}

// ---- feature matrices -----------------------------------------------------------

/// Batched eval-mode feature extraction; rows align with sample order.
inline Tensor features_for_samples(const NetworkSpec& net, Parameters& params,
                                   const std::vector<LabeledSample>& samples,
                                   std::size_t batch_size = 16) {
    const std::size_t width = feature_width(net);
    Tensor out(Shape{samples.size(), width});
    const auto& ishape = net.input_shape;
    const std::size_t per_sample = ishape[0] * ishape[1] * ishape[2] * ishape[3];
    for (std::size_t lo = 0; lo < samples.size(); lo += batch_size) {
        const std::size_t hi = std::min(lo + batch_size, samples.size());
        Tensor batch(Shape{hi - lo, ishape[0], ishape[1], ishape[2], ishape[3]});
        for (std::size_t i = lo; i < hi; ++i) {
            if (samples[i].features.count() != per_sample)
                throw Error(Errc::data, "extract: sample '" + samples[i].subject_id +
                                            "' does not match the network input size");
            for (std::size_t v = 0; v < per_sample; ++v)
                batch[(i - lo) * per_sample + v] = samples[i].features[v];
        }
        Tensor feats = extract_features(net, params, batch);
        for (std::size_t i = lo; i < hi; ++i)
            for (std::size_t f = 0; f < width; ++f) out[i * width + f] = feats[(i - lo) * width + f];
    }
    return out;
}

struct FeatureTable {
    std::vector<std::string> subject_ids;
    std::vector<int> labels;
    Tensor features;  // [n x width]
};

inline void write_features_csv(const FeatureTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::data, "features: cannot open for writing: " + path);
    const std::size_t width = table.features.extent(1);
    out << "subject_id,label";
    for (std::size_t f = 0; f < width; ++f) out << ",f" << f;
    out << "\n";
    out << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < table.subject_ids.size(); ++i) {
        out << table.subject_ids[i] << "," << (table.labels[i] == 1 ? "SCZ" : "CN");
        for (std::size_t f = 0; f < width; ++f) out << "," << table.features[i * width + f];
        out << "\n";
    }
    if (!out) throw Error(Errc::data, "features: write failure: " + path);
}

inline FeatureTable read_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::data, "features: cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::data, "features: empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "subject_id" || header[1] != "label")
        throw Error(Errc::data, "features: bad header in " + path);
    const std::size_t width = header.size() - 2;
    for (std::size_t f = 0; f < width; ++f)
        if (header[2 + f] != "f" + std::to_string(f))
            throw Error(Errc::data, "features: bad feature column name '" + header[2 + f] + "'");

    FeatureTable table;
    std::vector<float> values;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != width + 2)
            throw Error(Errc::data, "features: row width mismatch in " + path);
        table.subject_ids.push_back(f[0]);
        if (f[1] == "CN")
            table.labels.push_back(0);
        else if (f[1] == "SCZ")
            table.labels.push_back(1);
        else
            throw Error(Errc::data, "features: label must be CN or SCZ, got '" + f[1] + "'");
        for (std::size_t c = 0; c < width; ++c) values.push_back(std::stof(f[2 + c]));
    }
    if (table.subject_ids.empty()) throw Error(Errc::data, "features: no rows in " + path);
    table.features = Tensor(Shape{table.subject_ids.size(), width}, std::move(values));
    return table;
}

// ---- commands --------------------------------------------------------------------

/// synth: volumes + manifest into out_dir; returns the manifest path.
inline std::string cmd_synth(const PipelineConfig& cfg, const std::string& out_dir) {
    generate_dataset(cfg.synth, out_dir);
    return (std::filesystem::path(out_dir) / "manifest.csv").string();
}

struct TrainCnnResult {
    std::string bundle_path;
    std::string trace_path;
    std::vector<EpochStats> trace;
};

/// train-cnn: stratified split, preset network, SGD training on the train
/// partition; writes model.vxb and train_trace.csv.
inline TrainCnnResult cmd_train_cnn(const PipelineConfig& cfg, const std::string& manifest_path,
                                    const std::string& out_dir) {
    auto manifest = read_manifest(manifest_path);
    auto [train_part, test_part] = split_dataset(manifest, cfg.split_fraction, cfg.seed);
    auto samples = prepare_manifest(train_part, cfg);

    NetworkSpec net = network_preset(cfg.preset, cfg.mode, network_input_shape(cfg));
    Parameters params = init_parameters(net, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    auto result = train(net, std::move(params), samples, tc);

    std::filesystem::create_directories(out_dir);
    ModelBundle bundle;
    bundle.network = std::move(net);
    bundle.params = std::move(result.params);
    bundle.seed = cfg.seed;
    bundle.slices_per_subject = cfg.slices_per_subject;
    const std::string bundle_path = (std::filesystem::path(out_dir) / "model.vxb").string();
    save_bundle(bundle, bundle_path);

    const std::string trace_path = (std::filesystem::path(out_dir) / "train_trace.csv").string();
    std::ofstream trace(trace_path, std::ios::trunc);
    trace << "epoch,loss,accuracy\n" << std::fixed << std::setprecision(6);
    for (const auto& e : result.trace) trace << e.epoch << "," << e.loss << "," << e.accuracy << "\n";

    return {bundle_path, trace_path, std::move(result.trace)};
}

enum class SplitSelect { train, test, all };

/// extract: FCL features for the selected partition into a CSV.
inline std::string cmd_extract(const std::string& bundle_path, const std::string& manifest_path,
                               const PipelineConfig& cfg, SplitSelect select,
                               const std::string& out_path) {
    ModelBundle bundle = load_bundle(bundle_path);
    auto manifest = read_manifest(manifest_path);
    DatasetManifest part;
    if (select == SplitSelect::all) {
        part = manifest;
    } else {
        auto [train_part, test_part] = split_dataset(manifest, cfg.split_fraction, cfg.seed);
        part = select == SplitSelect::train ? train_part : test_part;
    }
    auto samples = prepare_manifest(part, cfg);

    FeatureTable table;
    table.features = features_for_samples(bundle.network, bundle.params, samples);
    for (const auto& s : samples) {
        table.subject_ids.push_back(s.subject_id);
        table.labels.push_back(s.label);
    }
    if (auto dir = std::filesystem::path(out_path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    write_features_csv(table, out_path);
    return out_path;
}

/// train-ensemble: fit the bagging classifier on a feature CSV and attach
/// it to the bundle.
inline void cmd_train_ensemble(const std::string& bundle_path, const std::string& features_path,
                               const PipelineConfig& cfg, const std::string& out_bundle_path) {
    ModelBundle bundle = load_bundle(bundle_path);
    FeatureTable table = read_features_csv(features_path);
    if (table.features.extent(1) != feature_width(bundle.network))
        throw Error(Errc::data, "train-ensemble: feature width " +
                                    std::to_string(table.features.extent(1)) +
                                    " does not match the bundle's network (" +
                                    std::to_string(feature_width(bundle.network)) + ")");
    BaggingConfig bc = cfg.bagging;
    bc.seed = cfg.seed;
    EnsemblePart part;
    part.config = bc;
    part.model = fit_bagging(table.features, table.labels, bc);
    bundle.ensemble = std::move(part);
    save_bundle(bundle, out_bundle_path);
}

// ---- evaluation --------------------------------------------------------------------

struct SubjectScores {
    std::vector<std::string> subject_ids;
    std::vector<int> labels;
    std::vector<double> scores;  // p(SCZ) per subject
    std::vector<int> predictions;
};

/// Per-subject SCZ probability under the bundle's ensemble. The 2D path
/// averages the per-slice probabilities per subject before thresholding.
inline SubjectScores score_subjects(ModelBundle& bundle, const DatasetManifest& part,
                                    const PipelineConfig& cfg) {
    if (!bundle.ensemble) throw Error(Errc::data, "evaluate: bundle has no fitted ensemble");
    SubjectScores out;
    const std::size_t width = feature_width(bundle.network);
    for (const auto& rec : part.records) {
        auto samples = prepare_record(rec, cfg);
        Tensor feats = features_for_samples(bundle.network, bundle.params, samples);
        double acc = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto p = predict_proba(bundle.ensemble->model,
                                   std::span<const float>(feats.data() + i * width, width));
            acc += p[1];
        }
        const double score = acc / static_cast<double>(samples.size());
        out.subject_ids.push_back(rec.subject_id);
        out.labels.push_back(label_index(rec.label));
        out.scores.push_back(score);
        out.predictions.push_back(score > 0.5 ? 1 : 0);
    }
    return out;
}

struct EvaluateOutput {
    std::vector<NamedReport> reports;
    std::map<std::string, ConfusionMatrix> confusions;
    std::map<std::string, RocCurve> rocs;
    std::string report_txt, report_csv, report_json;
};

namespace pipeline_detail {

inline std::string safe_name(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_');
    return s;
}

}  // namespace pipeline_detail

/// evaluate: score the held-out partition, render the comparison table,
/// write report.{txt,csv,json} and per-classifier ROC CSVs.
inline EvaluateOutput cmd_evaluate(const std::string& bundle_path, const std::string& manifest_path,
                                   const PipelineConfig& cfg, const std::string& out_dir,
                                   bool with_baselines = false) {
    ModelBundle bundle = load_bundle(bundle_path);
    auto manifest = read_manifest(manifest_path);
    auto [train_part, test_part] = split_dataset(manifest, cfg.split_fraction, cfg.seed);

    EvaluateOutput out;
    auto add = [&](const std::string& name, const std::vector<int>& preds,
                   const std::vector<int>& labels, const std::vector<double>& scores) {
        auto cm = confusion(preds, labels);
        out.reports.push_back({name, metrics(cm)});
        out.confusions[name] = cm;
        out.rocs[name] = roc_curve(scores, labels);
    };

    auto ensemble_scores = score_subjects(bundle, test_part, cfg);
    add("Ensemble Bagging", ensemble_scores.predictions, ensemble_scores.labels,
        ensemble_scores.scores);

    if (with_baselines) {
        // baselines share the CNN features; per-subject features in 2D mode
        // are the mean of the slice feature vectors
        auto subject_features = [&](const DatasetManifest& part, std::vector<int>& labels) {
            const std::size_t width = feature_width(bundle.network);
            Tensor X(Shape{part.records.size(), width});
            labels.clear();
            for (std::size_t r = 0; r < part.records.size(); ++r) {
                auto samples = prepare_record(part.records[r], cfg);
                Tensor feats = features_for_samples(bundle.network, bundle.params, samples);
                for (std::size_t f = 0; f < width; ++f) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < samples.size(); ++i) acc += feats[i * width + f];
                    X[r * width + f] = static_cast<float>(acc / static_cast<double>(samples.size()));
                }
                labels.push_back(label_index(part.records[r].label));
            }
            return X;
        };
        std::vector<int> train_labels, test_labels;
        Tensor X_train = subject_features(train_part, train_labels);
        Tensor X_test = subject_features(test_part, test_labels);
        const std::size_t width = feature_width(bundle.network);
        const Rng master(cfg.seed);

        auto eval_rows = [&](const std::string& name, auto proba_fn) {
            std::vector<int> preds;
            std::vector<double> scores;
            for (std::size_t i = 0; i < test_labels.size(); ++i) {
                auto p = proba_fn(std::span<const float>(X_test.data() + i * width, width));
                scores.push_back(p[1]);
                preds.push_back(p[1] > p[0] ? 1 : 0);
            }
            add(name, preds, test_labels, scores);
        };

        auto svm = svm_fit(X_train, train_labels, cfg.baselines.svm_lambda, cfg.baselines.svm_epochs,
                           master.derive(101).next_u64());
        eval_rows("SVM", [&](std::span<const float> x) { return svm_predict_proba(svm, x); });

        auto gnb = gnb_fit(X_train, train_labels);
        eval_rows("Naive Bayes", [&](std::span<const float> x) { return gnb_predict_proba(gnb, x); });

        auto knn = knn_fit(X_train, train_labels,
                           std::min(cfg.baselines.knn_k, X_train.extent(0)));
        eval_rows("K-Nearest Neighbour",
                  [&](std::span<const float> x) { return knn_predict_proba(knn, x); });

        RandomForestConfig rf_cfg;
        rf_cfg.bagging = cfg.bagging;
        rf_cfg.bagging.seed = master.derive(102).next_u64();
        auto rf = rf_fit(X_train, train_labels, rf_cfg);
        eval_rows("Random Forest", [&](std::span<const float> x) { return predict_proba(rf, x); });

        auto rvfl = rvfl_fit(X_train, train_labels, cfg.baselines.rvfl_hidden,
                             cfg.baselines.rvfl_lambda, master.derive(103).next_u64());
        eval_rows("Standard RVFL",
                  [&](std::span<const float> x) { return rvfl_predict_proba(rvfl, x); });
    }

    out.report_txt = render_table(out.reports);
    out.report_csv = render_csv(out.reports);
    nlohmann::json jreport;
    jreport["metrics"] = render_json(out.reports);
    for (const auto& [name, cm] : out.confusions)
        jreport["confusion"][name] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
    for (const auto& [name, roc] : out.rocs) jreport["auc"][name] = roc.auc;
    out.report_json = jreport.dump(2);

    std::filesystem::create_directories(out_dir);
    auto write_file = [&](const std::string& name, const std::string& content) {
        std::ofstream f((std::filesystem::path(out_dir) / name).string(), std::ios::trunc);
        f << content;
        if (!f) throw Error(Errc::data, "evaluate: write failure for " + name);
    };
    write_file("report.txt", out.report_txt);
    write_file("report.csv", out.report_csv);
    write_file("report.json", out.report_json);
    for (const auto& [name, roc] : out.rocs)
        write_file("roc_" + pipeline_detail::safe_name(name) + ".csv", render_roc_csv(roc));
    return out;
}

struct Prediction {
    int label = 0;
    std::array<double, 2> proba{0.5, 0.5};
    bool via_ensemble = false;
};

/// predict: one volume through the bundled CNN (and ensemble when fitted).
inline Prediction cmd_predict(const std::string& bundle_path, const std::string& volume_path,
                              const PipelineConfig& cfg) {
    ModelBundle bundle = load_bundle(bundle_path);
    ManifestRecord rec;
    rec.subject_id = "query";
    rec.path = volume_path;
    rec.label = ClassLabel::CN;  // placeholder, unused for scoring
    auto samples = prepare_record(rec, cfg);

    Prediction result;
    if (bundle.ensemble) {
        const std::size_t width = feature_width(bundle.network);
        Tensor feats = features_for_samples(bundle.network, bundle.params, samples);
        double acc = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto p = predict_proba(bundle.ensemble->model,
                                   std::span<const float>(feats.data() + i * width, width));
            acc += p[1];
        }
        const double p1 = acc / static_cast<double>(samples.size());
        result.proba = {1.0 - p1, p1};
        result.via_ensemble = true;
    } else {
        const auto& ishape = bundle.network.input_shape;
        double acc = 0.0;
        for (const auto& s : samples) {
            Tensor batch = reshape(s.features, Shape{1, ishape[0], ishape[1], ishape[2], ishape[3]});
            auto fwd = forward(bundle.network, bundle.params, batch, Mode::eval);
            acc += fwd.probs[1];
        }
        const double p1 = acc / static_cast<double>(samples.size());
        result.proba = {1.0 - p1, p1};
    }
    result.label = result.proba[1] > result.proba[0] ? 1 : 0;
    return result;
}

/// cost: MAC-count breakdown, either from raw symbols or for a preset.
inline std::string render_cost(const NetworkCost& cost) {
    std::ostringstream os;
    os << "conv layers:\n";
    for (const auto& lc : cost.conv_layers) {
        const auto& p = lc.params;
        os << "  layer " << lc.layer_index << ": M=" << p.m << " N=" << p.n_dim << " K=" << p.k
           << " n=" << p.kernel_n << " t=" << p.kernel_t << " c=" << p.channels << " W=" << p.filters
           << " -> " << lc.macs << " MACs\n";
    }
    os << "conv total: " << cost.conv_total << " MACs\n";
    os << "ensemble (B*D): " << cost.ensemble << "\n";
    os << "total: " << cost.total << "\n";
    return os.str();
}

}  // namespace voxbag

#endif  // VOXBAG_PIPELINE_HPP_
