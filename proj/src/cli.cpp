#include "wrf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "wrf/bench.hpp"
#include "wrf/complexity.hpp"
#include "wrf/image.hpp"
#include "wrf/metrics.hpp"
#include "wrf/model.hpp"
#include "wrf/rng.hpp"

namespace fs = std::filesystem;

namespace wrf {

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

int cmd_init_config(const std::string& out_path) {
    const std::string text = run_config_to_json(default_run_config());
    if (out_path.empty())
        std::cout << text;
    else
        write_text_file(out_path, text);
    return 0;
}

int cmd_rand_weights(const std::string& config_path, uint64_t seed, bool seed_given,
                     const std::string& out_path) {
    RunConfig cfg = load_run_config(config_path);
    const uint64_t use_seed = seed_given ? seed : cfg.seed;
    WeightContainer w = rand_weights(cfg, use_seed);
    w.save(out_path);
    std::cout << "wrote " << w.size() << " branched tensors (" << w.total_elements() << " elements, seed "
              << use_seed << ") to " << out_path << "\n";
    return 0;
}

int cmd_fuse(const std::string& config_path, const std::string& in_path, const std::string& out_path) {
    RunConfig cfg = load_run_config(config_path);
    WeightContainer branched = WeightContainer::load(in_path);
    WeightContainer fused = fuse_weights(branched, cfg);
    fused.save(out_path);
    std::cout << "fused " << branched.size() << " -> " << fused.size() << " tensors ("
              << branched.total_elements() << " -> " << fused.total_elements() << " elements) to "
              << out_path << "\n";
    return 0;
}

// per-block input: a small grid that exercises borders at the block stride
std::vector<int> block_probe_shape(const RepBlockDesc& d) {
    const int side = 8 * d.stride;
    return {1, d.in_channels, side, side};
}

int cmd_verify(const std::string& config_path, const std::string& weights_path,
               const std::string& fused_path, int size, int trials, float tol) {
    RunConfig cfg = load_run_config(config_path);
    WeightContainer branched = WeightContainer::load(weights_path);
    if (branched.mode() != Mode::branched)
        throw Error("verify: expected a branched-mode container");
    // default: fuse in memory; --fused checks an externally produced container
    WeightContainer fused = fused_path.empty() ? fuse_weights(branched, cfg)
                                               : WeightContainer::load(fused_path);
    if (fused.mode() != Mode::fused) throw Error("verify: --fused container is not fused-mode");
    validate_container(fused, cfg);

    bool all_pass = true;
    float worst = 0.0f;

    const ModelDesc desc = describe_model(cfg);
    for (const RepBlockDesc& d : desc.rep_blocks) {
        RepUnit bu = bind_rep_unit(branched, d);
        RepUnit fu = bind_rep_unit(fused, d);
        EquivalenceReport r = verify_equivalence([&](const Tensor& x) { return bu.forward(x); },
                                                 [&](const Tensor& x) { return fu.forward(x); },
                                                 block_probe_shape(d), trials, cfg.seed + fnv1a64(d.prefix),
                                                 tol);
        worst = std::max(worst, r.max_abs_diff);
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "pass" : "FAIL") << " block " << d.prefix << " max_diff="
                  << std::scientific << std::setprecision(3) << r.max_abs_diff << std::defaultfloat << "\n";
    }

    Model bm(cfg, branched), fm(cfg, fused);
    float model_worst = 0.0f;
    for (int t = 0; t < trials; ++t) {
        Tensor x = random_uniform({1, 3, size, size}, cfg.seed + 7700 + static_cast<uint64_t>(t));
        PredictionBundle a = bm.forward(x);
        PredictionBundle b = fm.forward(x);
        model_worst = std::max(model_worst, max_abs_diff(a.seg_logits, b.seg_logits));
        model_worst = std::max(model_worst, max_abs_diff(a.cls_logits, b.cls_logits));
    }
    const bool model_pass = model_worst <= tol;
    all_pass = all_pass && model_pass;
    worst = std::max(worst, model_worst);
    std::cout << (model_pass ? "pass" : "FAIL") << " model end-to-end (" << size << "x" << size
              << ", " << trials << " trials) max_diff=" << std::scientific << std::setprecision(3)
              << model_worst << std::defaultfloat << "\n";
    std::cout << "max_abs_diff=" << std::scientific << std::setprecision(3) << worst << std::defaultfloat
              << " tolerance=" << tol << " -> " << (all_pass ? "PASS" : "FAIL") << "\n";
    return all_pass ? 0 : 1;
}

int cmd_count(const std::string& config_path, const std::string& weights_path, int size,
              const std::string& json_path) {
    RunConfig cfg = load_run_config(config_path);
    ComplexityReport b = count_flops(cfg, 1, size, size, Mode::branched);
    ComplexityReport f = count_flops(cfg, 1, size, size, Mode::fused);
    if (!weights_path.empty()) {
        WeightContainer w = WeightContainer::load(weights_path);
        validate_container(w, cfg);
        const int64_t expect = w.mode() == Mode::branched ? b.params : f.params;
        std::cout << "weights_mode=" << mode_name(w.mode()) << " records=" << w.size()
                  << " elements=" << w.total_elements() << (w.total_elements() == expect ? " (matches manifest)" : "")
                  << "\n";
    }
    std::cout << "--- branched ---\n" << b.to_text();
    std::cout << "--- fused ---\n" << f.to_text();
    std::cout << std::fixed << std::setprecision(4)
              << "flop_ratio=" << static_cast<double>(b.flops) / static_cast<double>(f.flops) << "\n";
    if (!json_path.empty())
        write_text_file(json_path, "{\n\"branched\": " + b.to_json() + ",\n\"fused\": " + f.to_json() + "}\n");
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& weights_path, const std::string& mode_str,
              int size, int iters, int warmup, const std::string& json_path) {
    RunConfig cfg = load_run_config(config_path);
    const Mode mode = mode_from_name(mode_str);
    WeightContainer w = WeightContainer::load(weights_path);
    if (mode == Mode::fused && w.mode() == Mode::branched) w = fuse_weights(w, cfg);
    if (mode == Mode::branched && w.mode() == Mode::fused)
        throw Error("bench: cannot run branched mode from a fused container");
    Model model(cfg, w);
    BenchReport rep = bench_latency(model, 1, size, size, warmup, iters, cfg.seed);
    std::cout << "mode=" << mode_name(mode) << " size=" << size << "\n" << rep.to_text();
    if (!json_path.empty()) write_text_file(json_path, rep.to_json());
    return 0;
}

int cmd_infer(const std::string& config_path, const std::string& weights_path, const std::string& image_path,
              const std::string& mask_out, const std::string& json_out) {
    RunConfig cfg = load_run_config(config_path);
    WeightContainer w = WeightContainer::load(weights_path);
    Model model(cfg, w);

    ImageU8 img = read_ppm(image_path);
    Tensor input = preprocess_image(img, cfg.input_size);
    PredictionBundle pred = model.forward(input);

    // probabilities over (male, female)
    Tensor probs = softmax_rows(pred.cls_logits);
    const float p_male = probs.at(0, 0), p_female = probs.at(0, 1);
    const char* label = p_female > p_male ? "female" : "male";

    if (!mask_out.empty()) {
        Tensor logits_full = bilinear_resize(pred.seg_logits, img.height, img.width);
        write_pgm(mask_out, mask_from_logits(logits_full));
    }
    if (!json_out.empty()) {
        std::ostringstream os;
        os << std::setprecision(8) << "{\n  \"probabilities\": [" << p_male << ", " << p_female
           << "],\n  \"label\": \"" << label << "\"\n}\n";
        write_text_file(json_out, os.str());
    }
    std::cout << std::setprecision(6) << "p_male=" << p_male << " p_female=" << p_female
              << " label=" << label << "\n";
    return 0;
}

int label_index(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "0" || s == "male") return 0;
    if (s == "1" || s == "female") return 1;
    throw Error("eval: unknown label '" + s + "' (expected male|female|0|1)");
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& labels_csv,
             const std::string& json_path) {
    if (!fs::is_directory(pred_dir)) throw Error("eval: '" + pred_dir + "' is not a directory");
    if (!fs::is_directory(gt_dir)) throw Error("eval: '" + gt_dir + "' is not a directory");

    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.path().extension() == ".pgm") stems.push_back(entry.path().stem().string());
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw Error("eval: no .pgm predictions in '" + pred_dir + "'");

    ConfusionMatrix pixel_cm(2);
    for (const std::string& stem : stems) {
        ImageU8 pred = read_pgm((fs::path(pred_dir) / (stem + ".pgm")).string());
        const fs::path gt_path = fs::path(gt_dir) / (stem + ".pgm");
        if (!fs::exists(gt_path)) throw Error("eval: missing ground truth for '" + stem + "'");
        ImageU8 gt = read_pgm(gt_path.string());
        if (pred.width != gt.width || pred.height != gt.height)
            throw Error("eval: size mismatch for '" + stem + "'");
        ConfusionMatrix shard(2);
        for (size_t i = 0; i < pred.pixels.size(); ++i)
            shard.record(gt.pixels[i] > 127 ? 1 : 0, pred.pixels[i] > 127 ? 1 : 0);
        pixel_cm.merge(shard);
    }
    std::cout << "--- segmentation (" << stems.size() << " masks, " << pixel_cm.total() << " pixels) ---\n";
    MetricsReport seg_rep = metrics_from_confusion(pixel_cm);
    std::cout << metrics_to_text(seg_rep);

    std::string cls_json = "null";
    if (!labels_csv.empty()) {
        std::ifstream in(labels_csv);
        if (!in) throw Error("eval: cannot open labels file '" + labels_csv + "'");
        ConfusionMatrix sample_cm(2);
        std::string line;
        int samples = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const size_t comma = line.find(',');
            if (comma == std::string::npos) throw Error("eval: malformed CSV line '" + line + "'");
            const std::string stem = line.substr(0, comma);
            const int truth = label_index(line.substr(comma + 1));
            const fs::path jpath = fs::path(pred_dir) / (stem + ".json");
            std::ifstream jin(jpath);
            if (!jin) throw Error("eval: missing prediction JSON for '" + stem + "'");
            nlohmann::json j;
            try {
                jin >> j;
            } catch (const nlohmann::json::exception& e) {
                throw Error("eval: bad JSON in '" + jpath.string() + "': " + e.what());
            }
            const int pred = label_index(j.at("label").get<std::string>());
            sample_cm.record(truth, pred);
            ++samples;
        }
        if (samples == 0) throw Error("eval: labels file has no entries");
        std::cout << "--- classification (" << samples << " samples) ---\n";
        MetricsReport cls_rep = metrics_from_confusion(sample_cm);
        std::cout << metrics_to_text(cls_rep);
        std::ostringstream cj;
        cj << std::setprecision(10) << "{\"macc\": " << cls_rep.macc << ", \"mf1\": " << cls_rep.mf1 << "}";
        cls_json = cj.str();
    }
    if (!json_path.empty()) {
        std::ostringstream os;
        os << std::setprecision(10) << "{\n  \"segmentation\": {\"miou\": " << seg_rep.miou
           << ", \"mfscore\": " << seg_rep.mfscore << "},\n  \"classification\": " << cls_json << "\n}\n";
        write_text_file(json_path, os.str());
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"WeedRepFormer inference engine and reparameterization verifier"};
    app.require_subcommand(1);

    std::string config_path, weights_path, in_path, out_path, image_path, mask_out, json_out;
    std::string mode_str = "fused", pred_dir, gt_dir, labels_csv, json_path;
    uint64_t seed = 0;
    int size = 0, trials = 5, iters = 50, warmup = 5;
    float tol = 1e-4f;

    CLI::App* init = app.add_subcommand("init-config", "emit the default run configuration");
    init->add_option("--out", out_path, "output path (stdout when omitted)");

    CLI::App* rw = app.add_subcommand("rand-weights", "generate deterministic branched weights");
    rw->add_option("--config", config_path)->required();
    CLI::Option* seed_opt = rw->add_option("--seed", seed, "override the config seed");
    rw->add_option("--out", out_path)->required();

    CLI::App* fuse = app.add_subcommand("fuse", "collapse branched weights into fused weights");
    fuse->add_option("--config", config_path)->required();
    fuse->add_option("--in", in_path)->required();
    fuse->add_option("--out", out_path)->required();

    std::string fused_path;
    CLI::App* verify = app.add_subcommand("verify", "check branched/fused numerical equivalence");
    verify->add_option("--config", config_path)->required();
    verify->add_option("--weights", weights_path)->required();
    verify->add_option("--fused", fused_path, "verify against this container instead of fusing in memory");
    verify->add_option("--size", size, "input side length")->default_val(64);
    verify->add_option("--trials", trials)->default_val(5);
    verify->add_option("--tol", tol)->default_val(1e-4f);

    CLI::App* count = app.add_subcommand("count", "parameter and FLOP report for both modes");
    count->add_option("--config", config_path)->required();
    count->add_option("--weights", weights_path, "optional container to cross-check");
    count->add_option("--size", size)->default_val(512);
    count->add_option("--json", json_path, "also write a JSON report");

    CLI::App* bench = app.add_subcommand("bench", "forward-latency benchmark");
    bench->add_option("--config", config_path)->required();
    bench->add_option("--weights", weights_path)->required();
    bench->add_option("--mode", mode_str, "branched|fused")->default_val("fused");
    bench->add_option("--size", size)->default_val(512);
    bench->add_option("--iters", iters)->default_val(50);
    bench->add_option("--warmup", warmup)->default_val(5);
    bench->add_option("--json", json_path);

    CLI::App* infer = app.add_subcommand("infer", "segment and classify one PPM image");
    infer->add_option("--config", config_path)->required();
    infer->add_option("--weights", weights_path)->required();
    infer->add_option("--image", image_path)->required();
    infer->add_option("--mask-out", mask_out, "PGM mask output path");
    infer->add_option("--json-out", json_out, "classification JSON output path");

    CLI::App* eval = app.add_subcommand("eval", "score predicted masks/labels against ground truth");
    eval->add_option("--pred-dir", pred_dir)->required();
    eval->add_option("--gt-dir", gt_dir)->required();
    eval->add_option("--labels-csv", labels_csv, "lines of <stem>,<male|female|0|1>");
    eval->add_option("--json", json_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (init->parsed()) return cmd_init_config(out_path);
        if (rw->parsed()) return cmd_rand_weights(config_path, seed, seed_opt->count() > 0, out_path);
        if (fuse->parsed()) return cmd_fuse(config_path, in_path, out_path);
        if (verify->parsed()) return cmd_verify(config_path, weights_path, fused_path, size, trials, tol);
        if (count->parsed()) return cmd_count(config_path, weights_path, size, json_path);
        if (bench->parsed())
            return cmd_bench(config_path, weights_path, mode_str, size, iters, warmup, json_path);
        if (infer->parsed()) return cmd_infer(config_path, weights_path, image_path, mask_out, json_out);
        if (eval->parsed()) return cmd_eval(pred_dir, gt_dir, labels_csv, json_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace wrf
