#include "wrf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace wrf {

using nlohmann::json;

const char* mode_name(Mode mode) { return mode == Mode::branched ? "branched" : "fused"; }

Mode mode_from_name(const std::string& name) {
    if (name == "branched") return Mode::branched;
    if (name == "fused") return Mode::fused;
    throw Error("unknown mode '" + name + "' (expected branched|fused)");
}

void RunConfig::validate() const {
    const ModelConfig& m = model;
    for (int i = 0; i < 4; ++i) {
        if (m.embed_dims[i] <= 0 || m.depths[i] <= 0 || m.heads[i] <= 0 || m.mlp_ratios[i] <= 0)
            throw Error("config: stage " + std::to_string(i + 1) + " has a non-positive dimension");
        if (m.embed_dims[i] % m.heads[i])
            throw Error("config: embed_dims[" + std::to_string(i) + "] not divisible by heads");
        if (m.patch_kernels[i] <= 0 || m.patch_kernels[i] % 2 == 0)
            throw Error("config: patch_kernels[" + std::to_string(i) + "] must be odd");
        if (m.patch_strides[i] <= 0) throw Error("config: patch stride must be positive");
        if (m.sr_ratios[i] <= 0) throw Error("config: sr_ratios must be positive");
    }
    if (m.branch_count < 1) throw Error("config: branch_count (K) must be >= 1");
    if (m.lambda_cls < 0.0f) throw Error("config: lambda_cls must be >= 0");
    if (m.num_seg_classes < 2 || m.num_cls_classes < 2) throw Error("config: class counts must be >= 2");
    if (decoder.fusion_channels < m.num_seg_classes)
        throw Error("config: fusion_channels must be >= num_seg_classes");
    if (input_size <= 0 || input_size % 32)
        throw Error("config: input_size must be a positive multiple of 32");
    // sr ratio must divide each stage side at the configured input size
    int side = input_size;
    for (int i = 0; i < 4; ++i) {
        if (side % m.patch_strides[i])
            throw Error("config: stage " + std::to_string(i + 1) + " stride does not divide the map side");
        side /= m.patch_strides[i];
        if (side % m.sr_ratios[i])
            throw Error("config: sr_ratios[" + std::to_string(i) + "]=" + std::to_string(m.sr_ratios[i]) +
                        " does not divide stage side " + std::to_string(side));
    }
}

RunConfig default_run_config() { return RunConfig{}; }

namespace {

template <typename T, size_t N>
json arr_to_json(const std::array<T, N>& a) {
    json j = json::array();
    for (const T& v : a) j.push_back(v);
    return j;
}

template <typename T, size_t N>
void arr_from_json(const json& j, const char* key, std::array<T, N>& out) {
    if (!j.is_array() || j.size() != N)
        throw Error(std::string("config: '") + key + "' must be an array of " + std::to_string(N));
    for (size_t i = 0; i < N; ++i) out[i] = j[i].get<T>();
}

void reject_unknown(const json& j, const char* scope, const std::set<std::string>& known) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw Error(std::string("config: unknown key '") + it.key() + "' in " + scope);
}

}  // namespace

std::string run_config_to_json(const RunConfig& c) {
    json m;
    m["embed_dims"] = arr_to_json(c.model.embed_dims);
    m["depths"] = arr_to_json(c.model.depths);
    m["heads"] = arr_to_json(c.model.heads);
    m["mlp_ratios"] = arr_to_json(c.model.mlp_ratios);
    m["sr_ratios"] = arr_to_json(c.model.sr_ratios);
    m["patch_kernels"] = arr_to_json(c.model.patch_kernels);
    m["patch_strides"] = arr_to_json(c.model.patch_strides);
    m["cpe_stages"] = arr_to_json(c.model.cpe_stages);
    m["branch_count"] = c.model.branch_count;
    m["use_se"] = c.model.use_se;
    m["rep_patch_embed"] = c.model.rep_patch_embed;
    m["rep_mix_ffn"] = c.model.rep_mix_ffn;
    m["rep_cls_head"] = c.model.rep_cls_head;
    m["lambda_cls"] = c.model.lambda_cls;
    m["num_seg_classes"] = c.model.num_seg_classes;
    m["num_cls_classes"] = c.model.num_cls_classes;
    m["cls_hidden"] = c.model.cls_hidden;
    m["layer_scale_init"] = c.model.layer_scale_init;
    m["head_dropout"] = c.model.head_dropout;

    json j;
    j["model"] = m;
    j["decoder"] = json{{"fusion_channels", c.decoder.fusion_channels}};
    j["seed"] = c.seed;
    j["input_size"] = c.input_size;
    j["weights_path"] = c.weights_path;
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown(j, "top level", {"model", "decoder", "seed", "input_size", "weights_path"});

    RunConfig c;
    try {
        if (j.contains("model")) {
            const json& m = j.at("model");
            reject_unknown(m, "model",
                           {"embed_dims", "depths", "heads", "mlp_ratios", "sr_ratios", "patch_kernels",
                            "patch_strides", "cpe_stages", "branch_count", "use_se", "rep_patch_embed",
                            "rep_mix_ffn", "rep_cls_head", "lambda_cls", "num_seg_classes",
                            "num_cls_classes", "cls_hidden", "layer_scale_init", "head_dropout"});
            if (m.contains("embed_dims")) arr_from_json(m.at("embed_dims"), "embed_dims", c.model.embed_dims);
            if (m.contains("depths")) arr_from_json(m.at("depths"), "depths", c.model.depths);
            if (m.contains("heads")) arr_from_json(m.at("heads"), "heads", c.model.heads);
            if (m.contains("mlp_ratios")) arr_from_json(m.at("mlp_ratios"), "mlp_ratios", c.model.mlp_ratios);
            if (m.contains("sr_ratios")) arr_from_json(m.at("sr_ratios"), "sr_ratios", c.model.sr_ratios);
            if (m.contains("patch_kernels"))
                arr_from_json(m.at("patch_kernels"), "patch_kernels", c.model.patch_kernels);
            if (m.contains("patch_strides"))
                arr_from_json(m.at("patch_strides"), "patch_strides", c.model.patch_strides);
            if (m.contains("cpe_stages")) arr_from_json(m.at("cpe_stages"), "cpe_stages", c.model.cpe_stages);
            if (m.contains("branch_count")) c.model.branch_count = m.at("branch_count").get<int>();
            if (m.contains("use_se")) c.model.use_se = m.at("use_se").get<bool>();
            if (m.contains("rep_patch_embed")) c.model.rep_patch_embed = m.at("rep_patch_embed").get<bool>();
            if (m.contains("rep_mix_ffn")) c.model.rep_mix_ffn = m.at("rep_mix_ffn").get<bool>();
            if (m.contains("rep_cls_head")) c.model.rep_cls_head = m.at("rep_cls_head").get<bool>();
            if (m.contains("lambda_cls")) c.model.lambda_cls = m.at("lambda_cls").get<float>();
            if (m.contains("num_seg_classes")) c.model.num_seg_classes = m.at("num_seg_classes").get<int>();
            if (m.contains("num_cls_classes")) c.model.num_cls_classes = m.at("num_cls_classes").get<int>();
            if (m.contains("cls_hidden")) c.model.cls_hidden = m.at("cls_hidden").get<int>();
            if (m.contains("layer_scale_init")) c.model.layer_scale_init = m.at("layer_scale_init").get<float>();
            if (m.contains("head_dropout")) c.model.head_dropout = m.at("head_dropout").get<float>();
        }
        if (j.contains("decoder")) {
            const json& d = j.at("decoder");
            reject_unknown(d, "decoder", {"fusion_channels"});
            if (d.contains("fusion_channels")) c.decoder.fusion_channels = d.at("fusion_channels").get<int>();
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
        if (j.contains("input_size")) c.input_size = j.at("input_size").get<int>();
        if (j.contains("weights_path")) c.weights_path = j.at("weights_path").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json(buf.str());
}

void save_run_config(const RunConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("config: cannot write '" + path + "'");
    out << run_config_to_json(config);
}

}  // namespace wrf
