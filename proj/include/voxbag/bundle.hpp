#ifndef VOXBAG_BUNDLE_HPP_
#define VOXBAG_BUNDLE_HPP_

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "voxbag/bagging.hpp"
#include "voxbag/cnn/network.hpp"
#include "voxbag/error.hpp"

namespace voxbag {

/// Trained model container: the CNN (always) plus the fitted ensemble once
/// train-ensemble has run. On disk: "VXB1" magic, u32 format version,
/// u64 JSON length, JSON metadata, raw little-endian float32 tensor blocks,
/// then the serialized tree arrays. Metadata declares every block's byte
/// count; load verifies the declared sizes against the file before any
/// tensor is constructed.
struct EnsemblePart {
    BaggingConfig config;
    BaggingModel model;
};

struct ModelBundle {
    NetworkSpec network;
    Parameters params;
    std::uint64_t seed = 0;
    std::size_t slices_per_subject = 5;  // used by the 2D path
    std::optional<EnsemblePart> ensemble;
};

namespace bundle_detail {

constexpr char kMagic[4] = {'V', 'X', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

inline nlohmann::json layer_to_json(const LayerSpec& layer) {
    using nlohmann::json;
    if (std::holds_alternative<ConvSpec>(layer)) {
        const auto& s = std::get<ConvSpec>(layer);
        return json{{"type", "conv"},     {"in_ch", s.in_ch},   {"out_ch", s.out_ch},
                    {"kd", s.kd},         {"kh", s.kh},         {"kw", s.kw},
                    {"stride", s.stride}, {"pad_d", s.pad_d},   {"pad_h", s.pad_h},
                    {"pad_w", s.pad_w}};
    }
    if (std::holds_alternative<BatchNormSpec>(layer)) {
        const auto& s = std::get<BatchNormSpec>(layer);
        return json{{"type", "batchnorm"}, {"channels", s.channels}, {"eps", s.eps},
                    {"momentum", s.momentum}};
    }
    if (std::holds_alternative<ReluSpec>(layer)) return json{{"type", "relu"}};
    if (std::holds_alternative<MaxPoolSpec>(layer)) {
        const auto& s = std::get<MaxPoolSpec>(layer);
        return json{{"type", "maxpool"}, {"kd", s.kd}, {"kh", s.kh}, {"kw", s.kw},
                    {"sd", s.sd},        {"sh", s.sh}, {"sw", s.sw}};
    }
    if (std::holds_alternative<FlattenSpec>(layer)) return json{{"type", "flatten"}};
    if (std::holds_alternative<FcSpec>(layer)) {
        const auto& s = std::get<FcSpec>(layer);
        return json{{"type", "fc"}, {"in_dim", s.in_dim}, {"out_dim", s.out_dim}};
    }
    const auto& s = std::get<SoftmaxSpec>(layer);
    return json{{"type", "softmax"}, {"classes", s.classes}};
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "conv") {
        ConvSpec s;
        s.in_ch = j.at("in_ch").get<std::size_t>();
        s.out_ch = j.at("out_ch").get<std::size_t>();
        s.kd = j.at("kd").get<std::size_t>();
        s.kh = j.at("kh").get<std::size_t>();
        s.kw = j.at("kw").get<std::size_t>();
        s.stride = j.at("stride").get<std::size_t>();
        s.pad_d = j.at("pad_d").get<std::size_t>();
        s.pad_h = j.at("pad_h").get<std::size_t>();
        s.pad_w = j.at("pad_w").get<std::size_t>();
        return s;
    }
    if (type == "batchnorm") {
        BatchNormSpec s;
        s.channels = j.at("channels").get<std::size_t>();
        s.eps = j.at("eps").get<float>();
        s.momentum = j.at("momentum").get<float>();
        return s;
    }
    if (type == "relu") return ReluSpec{};
    if (type == "maxpool") {
        MaxPoolSpec s;
        s.kd = j.at("kd").get<std::size_t>();
        s.kh = j.at("kh").get<std::size_t>();
        s.kw = j.at("kw").get<std::size_t>();
        s.sd = j.at("sd").get<std::size_t>();
        s.sh = j.at("sh").get<std::size_t>();
        s.sw = j.at("sw").get<std::size_t>();
        return s;
    }
    if (type == "flatten") return FlattenSpec{};
    if (type == "fc") return FcSpec{j.at("in_dim").get<std::size_t>(), j.at("out_dim").get<std::size_t>()};
    if (type == "softmax") return SoftmaxSpec{j.at("classes").get<std::size_t>()};
    throw Error(Errc::persistence, "bundle: unknown layer type '" + type + "'");
}

/// Parameter tensors in their fixed serialization order.
template <typename Params, typename TensorPtr>
inline std::vector<std::pair<std::string, TensorPtr>> tensor_list_impl(const NetworkSpec& net,
                                                                       Params& params) {
    std::vector<std::pair<std::string, TensorPtr>> list;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const std::string prefix = "layer" + std::to_string(li);
        if (std::holds_alternative<ConvParams>(params.layers[li])) {
            auto& p = std::get<ConvParams>(params.layers[li]);
            list.emplace_back(prefix + ".w", &p.w);
            list.emplace_back(prefix + ".b", &p.b);
        } else if (std::holds_alternative<BatchNormParams>(params.layers[li])) {
            auto& p = std::get<BatchNormParams>(params.layers[li]);
            list.emplace_back(prefix + ".gamma", &p.gamma);
            list.emplace_back(prefix + ".beta", &p.beta);
            list.emplace_back(prefix + ".running_mean", &p.running_mean);
            list.emplace_back(prefix + ".running_var", &p.running_var);
        } else if (std::holds_alternative<FcParams>(params.layers[li])) {
            auto& p = std::get<FcParams>(params.layers[li]);
            list.emplace_back(prefix + ".w", &p.w);
            list.emplace_back(prefix + ".b", &p.b);
        }
    }
    return list;
}

inline std::vector<std::pair<std::string, const Tensor*>> tensor_list(const NetworkSpec& net,
                                                                      const Parameters& params) {
    return tensor_list_impl<const Parameters, const Tensor*>(net, params);
}

inline std::vector<std::pair<std::string, Tensor*>> tensor_list_mut(const NetworkSpec& net,
                                                                    Parameters& params) {
    return tensor_list_impl<Parameters, Tensor*>(net, params);
}

template <typename T>
inline void put(std::string& buf, const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
}

template <typename T>
inline T get(const std::string& buf, std::size_t& off) {
    if (off + sizeof(T) > buf.size()) throw Error(Errc::persistence, "bundle: corrupt length");
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

inline std::string serialize_trees(const BaggingModel& model) {
    std::string buf;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(model.trees.size()));
    for (const auto& tree : model.trees) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(tree.nodes.size()));
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(tree.n_features));
        for (const auto& n : tree.nodes) {
            put<std::int32_t>(buf, n.feature);
            put<double>(buf, n.threshold);
            put<std::int32_t>(buf, n.left);
            put<std::int32_t>(buf, n.right);
            put<double>(buf, n.class_counts[0]);
            put<double>(buf, n.class_counts[1]);
            put<double>(buf, n.posterior[0]);
            put<double>(buf, n.posterior[1]);
        }
    }
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(model.bag_indices.size()));
    for (const auto& bag : model.bag_indices) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(bag.size()));
        for (std::uint32_t idx : bag) put<std::uint32_t>(buf, idx);
    }
    return buf;
}

inline BaggingModel deserialize_trees(const std::string& buf) {
    BaggingModel model;
    std::size_t off = 0;
    const auto n_trees = get<std::uint32_t>(buf, off);
    model.trees.resize(n_trees);
    for (auto& tree : model.trees) {
        const auto n_nodes = get<std::uint32_t>(buf, off);
        tree.n_features = get<std::uint32_t>(buf, off);
        tree.nodes.resize(n_nodes);
        for (auto& n : tree.nodes) {
            n.feature = get<std::int32_t>(buf, off);
            n.threshold = get<double>(buf, off);
            n.left = get<std::int32_t>(buf, off);
            n.right = get<std::int32_t>(buf, off);
            n.class_counts[0] = get<double>(buf, off);
            n.class_counts[1] = get<double>(buf, off);
            n.posterior[0] = get<double>(buf, off);
            n.posterior[1] = get<double>(buf, off);
        }
    }
    const auto n_bags = get<std::uint32_t>(buf, off);
    model.bag_indices.resize(n_bags);
    for (auto& bag : model.bag_indices) {
        const auto len = get<std::uint32_t>(buf, off);
        bag.resize(len);
        for (auto& idx : bag) idx = get<std::uint32_t>(buf, off);
    }
    if (off != buf.size()) throw Error(Errc::persistence, "bundle: corrupt length in tree block");
    return model;
}

}  // namespace bundle_detail

inline void save_bundle(const ModelBundle& bundle, const std::string& path) {
    using nlohmann::json;
    validate_network(bundle.network);
    if (bundle.params.layers.size() != bundle.network.layers.size())
        throw Error(Errc::persistence, "bundle: parameter/layer count mismatch");

    json meta;
    meta["format_version"] = bundle_detail::kVersion;
    meta["seed"] = bundle.seed;
    meta["slices_per_subject"] = bundle.slices_per_subject;
    meta["feature_width"] = feature_width(bundle.network);
    meta["network"] = {{"input_shape", bundle.network.input_shape},
                       {"preset_id", bundle.network.preset_id},
                       {"mode", dims_mode_name(bundle.network.mode)}};
    json layers = json::array();
    for (const auto& layer : bundle.network.layers) layers.push_back(bundle_detail::layer_to_json(layer));
    meta["network"]["layers"] = layers;

    const auto tensors = bundle_detail::tensor_list(bundle.network, bundle.params);
    json tensor_meta = json::array();
    for (const auto& [name, t] : tensors)
        tensor_meta.push_back(
            {{"name", name}, {"shape", t->shape().dims()}, {"bytes", t->count() * sizeof(float)}});
    meta["tensors"] = tensor_meta;

    std::string tree_blob;
    if (bundle.ensemble) {
        tree_blob = bundle_detail::serialize_trees(bundle.ensemble->model);
        meta["ensemble"] = {{"n_bags", bundle.ensemble->config.n_bags},
                            {"seed", bundle.ensemble->config.seed},
                            {"max_depth", bundle.ensemble->config.tree.max_depth},
                            {"min_samples_split", bundle.ensemble->config.tree.min_samples_split},
                            {"min_impurity_decrease", bundle.ensemble->config.tree.min_impurity_decrease},
                            {"m_try", bundle.ensemble->config.tree.m_try},
                            {"tree_bytes", tree_blob.size()}};
    } else {
        meta["ensemble"] = nullptr;
    }

    const std::string meta_str = meta.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::persistence, "bundle: cannot open for writing: " + path);
    out.write(bundle_detail::kMagic, 4);
    const std::uint32_t version = bundle_detail::kVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t meta_len = meta_str.size();
    out.write(reinterpret_cast<const char*>(&meta_len), 8);
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (const auto& [name, t] : tensors)
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(t->count() * sizeof(float)));
    out.write(tree_blob.data(), static_cast<std::streamsize>(tree_blob.size()));
    if (!out) throw Error(Errc::persistence, "bundle: write failure: " + path);
}

inline ModelBundle load_bundle(const std::string& path) {
    using nlohmann::json;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::persistence, "bundle: cannot open: " + path);
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < 16) throw Error(Errc::persistence, "bundle: corrupt length (truncated header)");
    if (std::memcmp(raw.data(), bundle_detail::kMagic, 4) != 0)
        throw Error(Errc::persistence, "bundle: magic mismatch (not a VXB1 file)");
    std::uint32_t version;
    std::memcpy(&version, raw.data() + 4, 4);
    if (version != bundle_detail::kVersion)
        throw Error(Errc::persistence,
                    "bundle: version mismatch (got " + std::to_string(version) + ", expected " +
                        std::to_string(bundle_detail::kVersion) + ")");
    std::uint64_t meta_len;
    std::memcpy(&meta_len, raw.data() + 8, 8);
    if (16 + meta_len > raw.size())
        throw Error(Errc::persistence, "bundle: corrupt length (metadata exceeds file)");

    json meta;
    try {
        meta = json::parse(raw.substr(16, meta_len));
    } catch (const json::exception& e) {
        throw Error(Errc::persistence, std::string("bundle: bad metadata JSON: ") + e.what());
    }

    ModelBundle bundle;
    try {
        bundle.seed = meta.at("seed").get<std::uint64_t>();
        bundle.slices_per_subject = meta.at("slices_per_subject").get<std::size_t>();
        const auto& jnet = meta.at("network");
        const auto ishape = jnet.at("input_shape").get<std::vector<std::size_t>>();
        if (ishape.size() != 4) throw Error(Errc::persistence, "bundle: bad input_shape");
        std::copy(ishape.begin(), ishape.end(), bundle.network.input_shape.begin());
        bundle.network.preset_id = jnet.at("preset_id").get<int>();
        bundle.network.mode =
            jnet.at("mode").get<std::string>() == "2d" ? DimsMode::two_d : DimsMode::three_d;
        for (const auto& jl : jnet.at("layers"))
            bundle.network.layers.push_back(bundle_detail::layer_from_json(jl));
    } catch (const json::exception& e) {
        throw Error(Errc::persistence, std::string("bundle: incomplete metadata: ") + e.what());
    }
    validate_network(bundle.network);

    // verify declared block sizes against the file before touching tensors
    std::uint64_t declared = 0;
    for (const auto& jt : meta.at("tensors")) declared += jt.at("bytes").get<std::uint64_t>();
    std::uint64_t tree_bytes = 0;
    if (!meta.at("ensemble").is_null()) tree_bytes = meta["ensemble"].at("tree_bytes").get<std::uint64_t>();
    if (16 + meta_len + declared + tree_bytes != raw.size())
        throw Error(Errc::persistence, "bundle: corrupt length (declared " +
                                           std::to_string(declared + tree_bytes) + " payload bytes, file has " +
                                           std::to_string(raw.size() - 16 - meta_len) + ")");

    // materialize parameter tensors in declaration order
    bundle.params.layers.resize(bundle.network.layers.size());
    for (std::size_t li = 0; li < bundle.network.layers.size(); ++li) {
        const LayerSpec& layer = bundle.network.layers[li];
        if (std::holds_alternative<ConvSpec>(layer))
            bundle.params.layers[li] = ConvParams{};
        else if (std::holds_alternative<BatchNormSpec>(layer))
            bundle.params.layers[li] = BatchNormParams{};
        else if (std::holds_alternative<FcSpec>(layer))
            bundle.params.layers[li] = FcParams{};
    }
    auto slots = bundle_detail::tensor_list_mut(bundle.network, bundle.params);
    const auto& tensor_meta = meta.at("tensors");
    if (slots.size() != tensor_meta.size())
        throw Error(Errc::persistence, "bundle: tensor count mismatch with network layers");
    std::size_t off = 16 + meta_len;
    for (std::size_t ti = 0; ti < slots.size(); ++ti) {
        const auto& jt = tensor_meta[ti];
        if (jt.at("name").get<std::string>() != slots[ti].first)
            throw Error(Errc::persistence, "bundle: tensor order mismatch at " + slots[ti].first);
        const auto dims = jt.at("shape").get<std::vector<std::size_t>>();
        Shape shape(dims);
        const std::uint64_t bytes = jt.at("bytes").get<std::uint64_t>();
        if (bytes != shape.count() * sizeof(float))
            throw Error(Errc::persistence, "bundle: declared shape does not match declared bytes for " +
                                               slots[ti].first);
        Tensor t(shape);
        std::memcpy(t.data(), raw.data() + off, bytes);
        off += bytes;
        *slots[ti].second = std::move(t);
    }

    if (tree_bytes > 0) {
        EnsemblePart part;
        const auto& je = meta["ensemble"];
        part.config.n_bags = je.at("n_bags").get<std::size_t>();
        part.config.seed = je.at("seed").get<std::uint64_t>();
        part.config.tree.max_depth = je.at("max_depth").get<std::size_t>();
        part.config.tree.min_samples_split = je.at("min_samples_split").get<std::size_t>();
        part.config.tree.min_impurity_decrease = je.at("min_impurity_decrease").get<double>();
        part.config.tree.m_try = je.at("m_try").get<std::size_t>();
        part.model = bundle_detail::deserialize_trees(raw.substr(off, tree_bytes));
        bundle.ensemble = std::move(part);
    }
    return bundle;
}

}  // namespace voxbag

#endif  // VOXBAG_BUNDLE_HPP_
