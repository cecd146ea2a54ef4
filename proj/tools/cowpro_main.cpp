// Command-line surface: synth / pseudo-label / train / eval / predict /
// gradcheck. Exit codes: 0 success, 1 validation or config error, 2 I/O
// error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cowpro/dataset.hpp"
#include "cowpro/evaluation.hpp"
#include "cowpro/gradcheck.hpp"
#include "cowpro/predictor.hpp"
#include "cowpro/superpixel.hpp"
#include "cowpro/synth.hpp"
#include "cowpro/training.hpp"

namespace {

using namespace cowpro;
namespace fs = std::filesystem;

// "3", "1,4,7" or "2-9" over manifest order.
std::vector<int> parse_scan_selection(const std::string& spec, int n_scans) {
    std::vector<int> out;
    if (spec.empty()) {
        for (int i = 0; i < n_scans; ++i) out.push_back(i);
        return out;
    }
    std::string cur;
    auto flush = [&]() {
        if (cur.empty()) return;
        const auto dash = cur.find('-');
        if (dash == std::string::npos) {
            out.push_back(std::stoi(cur));
        } else {
            const int a = std::stoi(cur.substr(0, dash));
            const int b = std::stoi(cur.substr(dash + 1));
            require(a <= b, "scan selection: bad range `" + cur + "`");
            for (int i = a; i <= b; ++i) out.push_back(i);
        }
        cur.clear();
    };
    for (char c : spec) {
        if (c == ',')
            flush();
        else
            cur += c;
    }
    flush();
    for (int i : out)
        require(i >= 0 && i < n_scans,
                "scan selection: index " + std::to_string(i) + " out of range (have " +
                    std::to_string(n_scans) + " scans)");
    return out;
}

ScanVolume load_scan_volume(const DatasetInfo& info, const std::string& scan_id) {
    ScanVolume v;
    v.scan_id = scan_id;
    v.slices = load_scan_slices(info, scan_id);
    for (const auto& organ : info.organs)
        if (has_organ(info, scan_id, organ))
            v.organ_masks[organ] = load_organ_mask_slices(info, scan_id, organ);
    return v;
}

int cmd_synth(const std::string& out, int scans, int slices, int size, std::uint64_t seed) {
    const DatasetInfo info = synth_dataset(out, scans, slices, size, seed);
    std::cout << "wrote " << info.scans.size() << " scans (" << info.slices_per_scan << "x"
              << info.image_size << "x" << info.image_size << ") to " << out << "\n";
    return 0;
}

int cmd_pseudo_label(const std::string& data, double scale, double sigma, int min_size) {
    const DatasetInfo info = load_dataset_info(data);
    FelzParams params;
    params.scale = scale;
    params.sigma = sigma;
    params.min_size = min_size;
    for (const auto& scan_id : info.scans) {
        const auto slices = load_scan_slices(info, scan_id);
        std::vector<LabelMap> maps;
        maps.reserve(slices.size());
        for (const auto& slice : slices) maps.push_back(felzenszwalb(slice, params));
        save_label_maps(info, scan_id, maps);
        int total = 0;
        for (const auto& m : maps) total += m.num_segments;
        std::cout << scan_id << ": " << total << " superpixels over " << maps.size()
                  << " slices\n";
    }
    return 0;
}

int cmd_train(const std::string& data, const std::string& config_path, const std::string& out,
              const std::string& resume_path) {
    const DatasetInfo info = load_dataset_info(data);
    const TrainConfig config = TrainConfig::from_kv(load_config_file(config_path));

    const int n_train = config.train_scans < 0
                            ? static_cast<int>(info.scans.size())
                            : std::min<int>(config.train_scans, static_cast<int>(info.scans.size()));
    require(n_train >= 1, "train: no training scans selected");

    // Slice pools: indices below the manifest's pool_split form "upper".
    auto in_pool = [&](int z) {
        if (config.slice_pool == "all") return true;
        return config.slice_pool == "upper" ? z < info.pool_split : z >= info.pool_split;
    };

    std::vector<std::vector<LabelMap>> label_store;
    std::vector<EpisodeSource> sources;
    label_store.reserve(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) {
        const std::string& scan_id = info.scans[static_cast<std::size_t>(i)];
        auto slices = load_scan_slices(info, scan_id);
        label_store.push_back(load_label_maps(info, scan_id));
        for (int z = 0; z < static_cast<int>(slices.size()); ++z) {
            if (!in_pool(z)) continue;
            EpisodeSource src;
            src.image = slices[static_cast<std::size_t>(z)];
            src.labels = &label_store.back()[static_cast<std::size_t>(z)];
            src.slice_id = scan_id + "/" + std::to_string(z);
            sources.push_back(std::move(src));
        }
    }

    std::optional<Checkpoint> resume;
    if (!resume_path.empty()) resume = read_checkpoint(resume_path);
    const TrainResult result = train(sources, config, out, resume ? &*resume : nullptr);
    std::cout << "trained " << config.iterations << " iterations over " << sources.size()
              << " slices; final checkpoint " << result.final_checkpoint.string() << "\n";
    if (result.ccr_skipped > 0)
        std::cout << "ccr skipped on " << result.ccr_skipped << " iterations\n";
    return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt_path, const std::string& organ,
             std::string qmap_path, const std::string& scan_spec, int support_override,
             bool no_quadrant_mask, double top_k, int window, double temperature,
             const std::string& records_path) {
    const DatasetInfo info = load_dataset_info(data);
    const Checkpoint ckpt = read_checkpoint(ckpt_path);

    HeadOverrides overrides;
    if (top_k > 0.0) overrides.top_k_fraction = top_k;
    if (window > 0) overrides.window = window;
    if (temperature > 0.0) overrides.temperature = temperature;
    CheckpointPredictor predictor(ckpt, overrides);

    if (qmap_path.empty()) qmap_path = (fs::path(data) / "quadrants.txt").string();
    const QuadrantMap qmap = load_quadrant_map(qmap_path);

    const std::vector<int> selection = parse_scan_selection(scan_spec, static_cast<int>(info.scans.size()));
    require(!selection.empty(), "eval: empty scan selection");
    const int support_idx = support_override >= 0 ? support_override : selection.back();
    require(support_idx >= 0 && support_idx < static_cast<int>(info.scans.size()),
            "eval: support scan index out of range");

    const ScanVolume support_scan = load_scan_volume(info, info.scans[static_cast<std::size_t>(support_idx)]);
    std::vector<ScanVolume> queries;
    for (int i : selection)
        if (i != support_idx) queries.push_back(load_scan_volume(info, info.scans[static_cast<std::size_t>(i)]));
    require(!queries.empty(), "eval: no query scans after removing the support scan");

    const EvalReport report = one_shot_eval(support_scan, queries, organ,
                                            predictor.as_slice_predictor(), qmap, !no_quadrant_mask);
    std::cout << report.to_text();
    if (!records_path.empty()) {
        std::ofstream os(records_path);
        if (!os) throw IoError("cannot write " + records_path);
        os << report.to_records();
    }
    return 0;
}

int cmd_predict(const std::string& support_img, const std::string& support_mask,
                const std::string& query_img, const std::string& ckpt_path,
                const std::string& out_path) {
    const Checkpoint ckpt = read_checkpoint(ckpt_path);
    CheckpointPredictor predictor(ckpt);

    auto squeeze = [](Tensor32 t, const std::string& path) {
        if (t.rank() == 3) {
            require(t.dim(0) == 1, "predict: expected a single-slice volume at " + path);
            t = Tensor32::from_data({t.dim(1), t.dim(2)}, t.data());
        }
        require(t.rank() == 2, "predict: expected [H,W] or [1,H,W] at " + path);
        return t;
    };
    auto load_image = [&](const std::string& path) {
        return squeeze(tensor_from_volume(read_volume(path)), path);
    };
    auto load_mask = [&](const std::string& path) {
        Volume v = read_volume(path);
        if (v.dtype == DType::kUint8) {
            std::vector<float> f(v.u8.size());
            for (std::size_t i = 0; i < f.size(); ++i) {
                require(v.u8[i] <= 1, "predict: mask must be binary at " + path);
                f[i] = static_cast<float>(v.u8[i]);
            }
            v.dtype = DType::kFloat32;
            v.f32 = std::move(f);
            v.u8.clear();
        }
        return squeeze(tensor_from_volume(v), path);
    };

    const Tensor32 si = load_image(support_img);
    const Tensor32 sm = load_mask(support_mask);
    const Tensor32 qi = load_image(query_img);
    const Tensor32 pred = predictor.predict(si, sm, qi);

    Volume out;
    out.dtype = DType::kUint8;
    out.dims = {static_cast<std::uint32_t>(pred.dim(0)), static_cast<std::uint32_t>(pred.dim(1))};
    out.u8.resize(pred.data().size());
    for (std::size_t i = 0; i < out.u8.size(); ++i)
        out.u8[i] = pred.data()[i] != 0.0f ? 1 : 0;
    write_volume(out_path, out);
    std::int64_t fg = 0;
    for (auto b : out.u8) fg += b;
    std::cout << "wrote " << out_path << " (" << fg << " foreground pixels)\n";
    return 0;
}

int cmd_gradcheck() {
    const GradCheckReport report = run_gradient_suite(std::cout);
    std::cout << report.checks << " checks, " << report.failures << " failures, worst rel err "
              << report.worst_rel_err << ", " << report.seconds << " s\n";
    return report.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised one-shot segmentation pipeline"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out;
    int synth_scans = 20, synth_slices = 12, synth_size = 64;
    std::uint64_t synth_seed = 7;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--scans", synth_scans, "number of scans");
    synth->add_option("--slices", synth_slices, "slices per scan");
    synth->add_option("--size", synth_size, "slice extent (divisible by 8)");
    synth->add_option("--seed", synth_seed, "generator seed");

    auto* plabel = app.add_subcommand("pseudo-label", "compute and persist superpixel label maps");
    std::string pl_data;
    double pl_scale = 100.0, pl_sigma = 0.8;
    int pl_min_size = 0;
    plabel->add_option("--data", pl_data, "dataset directory")->required();
    plabel->add_option("--scale", pl_scale, "merge threshold scale k");
    plabel->add_option("--sigma", pl_sigma, "Gaussian smoothing sigma");
    plabel->add_option("--min-size", pl_min_size, "minimum segment size (0 = area-scaled)");

    auto* train_cmd = app.add_subcommand("train", "episodic self-supervised training");
    std::string tr_data, tr_config, tr_out, tr_resume;
    train_cmd->add_option("--data", tr_data, "dataset directory")->required();
    train_cmd->add_option("--config", tr_config, "training config file")->required();
    train_cmd->add_option("--out", tr_out, "output directory")->required();
    train_cmd->add_option("--resume", tr_resume, "checkpoint to resume from");

    auto* eval_cmd = app.add_subcommand("eval", "one-shot evaluation without fine-tuning");
    std::string ev_data, ev_ckpt, ev_organ, ev_qmap, ev_scans, ev_records;
    int ev_support = -1, ev_window = 0;
    double ev_topk = 0.0, ev_temp = 0.0;
    bool ev_noquad = false;
    eval_cmd->add_option("--data", ev_data, "dataset directory")->required();
    eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--organ", ev_organ, "organ to segment")->required();
    eval_cmd->add_option("--quadrant-map", ev_qmap, "quadrant map file (default: dataset's)");
    eval_cmd->add_option("--scans", ev_scans, "scan selection, e.g. 15-19 (default: all)");
    eval_cmd->add_option("--support-scan", ev_support, "support scan index (default: last of selection)");
    eval_cmd->add_option("--top-k", ev_topk, "override top-k prototype fraction");
    eval_cmd->add_option("--window", ev_window, "override averaging window");
    eval_cmd->add_option("--temperature", ev_temp, "override softmax temperature");
    eval_cmd->add_flag("--no-quadrant-mask", ev_noquad, "disable quadrant masking");
    eval_cmd->add_option("--records", ev_records, "write machine-readable records here");

    auto* predict_cmd = app.add_subcommand("predict", "segment one query slice");
    std::string pr_si, pr_sm, pr_qi, pr_ckpt, pr_out;
    predict_cmd->add_option("--support-img", pr_si)->required();
    predict_cmd->add_option("--support-mask", pr_sm)->required();
    predict_cmd->add_option("--query-img", pr_qi)->required();
    predict_cmd->add_option("--ckpt", pr_ckpt)->required();
    predict_cmd->add_option("--out", pr_out)->required();

    app.add_subcommand("gradcheck", "run the finite-difference gradient suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand("synth"))
            return cmd_synth(synth_out, synth_scans, synth_slices, synth_size, synth_seed);
        if (app.got_subcommand("pseudo-label"))
            return cmd_pseudo_label(pl_data, pl_scale, pl_sigma, pl_min_size);
        if (app.got_subcommand("train")) return cmd_train(tr_data, tr_config, tr_out, tr_resume);
        if (app.got_subcommand("eval"))
            return cmd_eval(ev_data, ev_ckpt, ev_organ, ev_qmap, ev_scans, ev_support, ev_noquad,
                            ev_topk, ev_window, ev_temp, ev_records);
        if (app.got_subcommand("predict")) return cmd_predict(pr_si, pr_sm, pr_qi, pr_ckpt, pr_out);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
