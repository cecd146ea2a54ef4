#include "cowpro/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace cowpro {

namespace {

bool has_foreground(const Tensor32& mask) {
    for (float v : mask.data())
        if (v != 0.0f) return true;
    return false;
}

Tensor32 threshold_mask(const std::vector<float>& probs, const Shape& shape) {
    std::vector<float> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > 0.5f ? 1.0f : 0.0f;
    return Tensor32::from_data(shape, std::move(out));
}

struct StepResult {
    Tensor32 total;
    double ssl = 0.0;
    double ccr = 0.0;
    bool ccr_skipped = false;
};

StepResult forward_step(EncoderWeights<float>& weights, const Episode& ep,
                        const TrainConfig& config) {
    const int s = ep.support_image.dim(0);
    Tensor32 support_feat = encode(weights, reshape(ep.support_image, {1, s, s}));
    Tensor32 query_feat = encode(weights, reshape(ep.query_image, {1, s, s}));

    HeadOutput<float> out = head_forward(support_feat, ep.support_mask, query_feat, config.head);
    Tensor32 ssl = ssl_loss(out.fg_prob, ep.query_gt, static_cast<float>(config.class_weight_bg),
                            static_cast<float>(config.class_weight_fg));

    StepResult result;
    result.ssl = static_cast<double>(ssl.item());
    if (!config.ccr_enabled) {
        result.total = ssl;
        return result;
    }

    // Hard prediction at image resolution, detached from the graph.
    Tensor32 up = bilinear_resize(
        reshape(out.fg_prob, {1, out.fg_prob.dim(0), out.fg_prob.dim(1)}), s, s);
    Tensor32 predicted = threshold_mask(up.data(), {s, s});
    if (!has_foreground(predicted)) {
        result.total = ssl;
        result.ccr_skipped = true;
        return result;
    }
    Tensor32 ccr;
    try {
        ccr = ccr_loss(query_feat, predicted, support_feat, ep.support_mask, config.head,
                       config.ccr_threshold);
    } catch (const DegenerateSupport&) {
        // e.g. an all-foreground prediction leaves no background prototypes
        result.total = ssl;
        result.ccr_skipped = true;
        return result;
    }
    result.ccr = static_cast<double>(ccr.item());
    result.total = add(ssl, ccr);
    return result;
}

}  // namespace

std::optional<Episode> build_episode(const Tensor32& slice, const LabelMap& labels,
                                     const TransformRanges& ranges, Rng& rng, int min_fg_pixels,
                                     const std::string& slice_id) {
    require(slice.rank() == 2, "build_episode: slice must be [H,W]");
    for (float v : slice.data())
        require(v >= 0.0f && v <= 1.0f, "build_episode: slice must be normalized to [0,1]");

    auto mask = sample_pseudo_mask(labels, rng.next_u64(), min_fg_pixels);
    if (!mask) return std::nullopt;

    for (int attempt = 0; attempt < 8; ++attempt) {
        const GeoParams geo = sample_geo(ranges.geo, rng);
        const IntParams intensity = sample_int(ranges.intensity, rng);
        auto [query_image, query_gt] = make_query(slice, *mask, geo, intensity);
        if (!has_foreground(query_gt)) continue;
        Episode ep;
        ep.support_image = slice;
        ep.support_mask = *mask;
        ep.query_image = std::move(query_image);
        ep.query_gt = std::move(query_gt);
        ep.slice_id = slice_id;
        return ep;
    }
    return std::nullopt;
}

double lr_schedule(double lr0, double decay, std::int64_t iter) {
    return lr0 * std::pow(decay, static_cast<double>(iter / 1000));
}

void sgd_step(EncoderWeights<float>& weights, double lr) {
    const float f = static_cast<float>(lr);
    for (auto& [name, param] : weights.params) {
        auto& data = param.mutable_data();
        const auto& grad = param.grad();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] -= f * grad[i];
        param.zero_grad();
    }
}

Checkpoint make_checkpoint(const EncoderWeights<float>& weights, const TrainConfig& config,
                           std::uint64_t iteration) {
    Checkpoint ckpt;
    ckpt.iteration = iteration;
    ckpt.config_text = config.to_kv().to_text();
    for (const auto& [name, param] : weights.params)
        ckpt.params.push_back({name, param.shape(), param.data()});
    return ckpt;
}

EncoderWeights<float> weights_from_checkpoint(const Checkpoint& ckpt) {
    const TrainConfig config = TrainConfig::from_kv(parse_key_values(ckpt.config_text));
    EncoderWeights<float> weights = init_weights<float>(config.encoder, config.seed);
    require(ckpt.params.size() == weights.params.size(), "checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        auto& [name, param] = weights.params[i];
        require(ckpt.params[i].name == name, "checkpoint: unexpected parameter " + ckpt.params[i].name);
        require(ckpt.params[i].shape == param.shape(),
                "checkpoint: shape mismatch for " + name);
        param.mutable_data() = ckpt.params[i].data;
    }
    return weights;
}

TrainResult train(const std::vector<EpisodeSource>& data, const TrainConfig& config,
                  const std::filesystem::path& out_dir, const Checkpoint* resume) {
    config.validate();
    require(!data.empty(), "train: no training slices");
    for (const auto& src : data) require(src.labels != nullptr, "train: slice without labels");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    EncoderWeights<float> weights =
        resume ? weights_from_checkpoint(*resume) : init_weights<float>(config.encoder, config.seed);
    const std::int64_t start_iter = resume ? static_cast<std::int64_t>(resume->iteration) : 0;
    require(start_iter <= config.iterations, "train: checkpoint is beyond the configured iterations");

    const int h = data[0].image.dim(0), w = data[0].image.dim(1);
    const int min_fg = config.min_fg_pixels > 0 ? config.min_fg_pixels : default_min_fg_pixels(h, w);

    const auto log_path = out_dir / "loss_log.txt";
    std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());

    TrainResult result;
    const Rng base(mix64(config.seed));
    for (std::int64_t iter = start_iter; iter < config.iterations; ++iter) {
        // Per-iteration stream: resuming at any checkpoint replays the exact
        // same randomness.
        Rng rng = base.fork(static_cast<std::uint64_t>(iter) + 0x100);

        StepResult step;
        bool stepped = false;
        for (int attempt = 0; attempt < 64 && !stepped; ++attempt) {
            const auto& src = data[static_cast<std::size_t>(rng.randint(static_cast<std::int64_t>(data.size())))];
            auto ep = build_episode(src.image, *src.labels, config.transforms, rng, min_fg, src.slice_id);
            if (!ep) continue;
            try {
                step = forward_step(weights, *ep, config);
                stepped = true;
            } catch (const DegenerateSupport&) {
                // pseudo-mask covered (nearly) the whole slice; redraw
            }
        }
        require(stepped, "train: could not build a usable episode after 64 attempts");

        backward(step.total);
        const double lr = lr_schedule(config.lr0, config.decay, iter);
        sgd_step(weights, lr);
        for (const auto& [name, param] : weights.params)
            for (float v : param.data())
                require(std::isfinite(v), "train: parameter " + name + " became non-finite");

        const double total = step.ssl + step.ccr;
        result.total_losses.push_back(total);
        if (step.ccr_skipped) ++result.ccr_skipped;

        char line[160];
        std::snprintf(line, sizeof(line), "%lld %.8e %.8e %.8e\n", static_cast<long long>(iter),
                      step.ssl, step.ccr, lr);
        log << line;

        const std::int64_t done = iter + 1;
        if (done % config.checkpoint_interval == 0 && done != config.iterations) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%06lld.cwpc", static_cast<long long>(done));
            write_checkpoint(out_dir / name, make_checkpoint(weights, config, static_cast<std::uint64_t>(done)));
        }
    }

    log << "# ccr_skipped = " << result.ccr_skipped << "\n";
    result.final_checkpoint = out_dir / "checkpoint_final.cwpc";
    write_checkpoint(result.final_checkpoint,
                     make_checkpoint(weights, config, static_cast<std::uint64_t>(config.iterations)));
    return result;
}

}  // namespace cowpro
