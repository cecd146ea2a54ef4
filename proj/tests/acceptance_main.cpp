// Acceptance suite: drives the library and the CLI end to end and prints one
// pass/fail line per criterion. Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "cowpro/dataset.hpp"
#include "cowpro/evaluation.hpp"
#include "cowpro/gradcheck.hpp"
#include "cowpro/head.hpp"
#include "cowpro/io.hpp"
#include "cowpro/superpixel.hpp"
#include "cowpro/training.hpp"
#include "oracles/naive_felz.hpp"
#include "oracles/naive_head.hpp"

namespace fs = std::filesystem;
using namespace cowpro;

namespace {

std::string g_cli;
fs::path g_work;
int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << what;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(const std::string& args) {
    const std::string cmd = g_cli + " " + args + " >> " + (g_work / "cli_log.txt").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Tensor64 random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor64::from_data(std::move(shape), std::move(v));
}

// Binary mask with one window-block forced on and one forced off, so every
// threshold mode yields non-degenerate FG and BG bags.
Tensor64 random_grid_mask(Rng& rng, int h, int w, int window) {
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = rng.uniform01() < 0.4 ? 1.0 : 0.0;
    auto paint = [&](int by, int bx, double val) {
        for (int y = 0; y < window; ++y)
            for (int x = 0; x < window; ++x)
                v[static_cast<std::size_t>((by * window + y) * w + bx * window + x)] = val;
    };
    paint(0, 0, 1.0);
    paint(h / window - 1, w / window - 1, 0.0);
    return Tensor64::from_data({h, w}, std::move(v));
}

// ---- criterion 1: gradient suite ----

void criterion_gradients() {
    std::ostringstream log;
    const GradCheckReport r = run_gradient_suite(log, 10, 1e-4, 1e-3);
    const bool pass = r.failures == 0 && r.seconds < 60.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%d checks, worst rel err %.3g, %.1f s", r.checks,
                  r.worst_rel_err, r.seconds);
    if (!pass) std::cout << log.str();
    report(1, pass, "finite-difference gradients for all ops and the composed loss", detail);
}

// ---- criterion 2: head oracle equivalence ----

void criterion_head_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = 16, fh = 8, fw = 8;
    double worst = 0.0;
    int runs = 0;
    Rng rng(mix64(0x2222));
    for (int seed = 0; seed < 20; ++seed)
        for (const bool fixed : {false, true})
            for (const int window : {2, 4})
                for (const double topk : {1.0, 0.5, 0.1}) {
                    auto sup = random_tensor(rng, {d, fh, fw});
                    auto qry = random_tensor(rng, {d, fh, fw});
                    auto mask = random_grid_mask(rng, window * fh, window * fw, window);

                    HeadConfig cfg;
                    cfg.window = window;
                    cfg.threshold.mode = fixed ? Thresholding::kFixed : Thresholding::kDynamic;
                    cfg.top_k_fraction = topk;
                    const auto got = head_forward(sup, mask, qry, cfg);

                    oracle::HeadParams params;
                    params.window = window;
                    params.fixed_threshold = fixed;
                    params.temperature = cfg.temperature;
                    params.top_k_fraction = topk;
                    params.logit_scale = cfg.logit_scale;
                    const auto ref = oracle::head_forward(sup.data(), mask.data(), window * fh,
                                                          window * fw, qry.data(), d, fh, fw,
                                                          params);
                    for (int i = 0; i < fh * fw; ++i) {
                        worst = std::max(worst, std::abs(got.fg_prob.data()[static_cast<std::size_t>(i)] -
                                                         ref.fg_prob[static_cast<std::size_t>(i)]));
                        worst = std::max(worst, std::abs(got.scores.s_fg.data()[static_cast<std::size_t>(i)] -
                                                         ref.s_fg[static_cast<std::size_t>(i)]));
                        worst = std::max(worst, std::abs(got.scores.s_bg.data()[static_cast<std::size_t>(i)] -
                                                         ref.s_bg[static_cast<std::size_t>(i)]));
                    }
                    ++runs;
                }
    const double secs = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%d runs, max abs diff %.3g, %.1f s", runs, worst, secs);
    report(2, worst < 1e-5 && secs < 60.0, "head_forward equals the naive reference", detail);
}

// ---- criterion 3: superpixel oracle + invariants ----

bool labelmap_invariants_ok(const LabelMap& m) {
    if (m.num_segments < 1) return false;
    std::vector<int> sizes(static_cast<std::size_t>(m.num_segments), 0);
    int next_expected = 0;
    for (int v : m.labels) {
        if (v < 0 || v >= m.num_segments) return false;
        if (v == next_expected) ++next_expected;  // first occurrences in id order
        if (v > next_expected) return false;
        ++sizes[static_cast<std::size_t>(v)];
    }
    for (int s : sizes)
        if (s == 0) return false;
    // every segment one 8-connected component
    std::vector<bool> seen(m.labels.size(), false);
    int comps = 0;
    for (int start = 0; start < static_cast<int>(m.labels.size()); ++start) {
        if (seen[static_cast<std::size_t>(start)]) continue;
        ++comps;
        std::queue<int> q;
        q.push(start);
        seen[static_cast<std::size_t>(start)] = true;
        while (!q.empty()) {
            const int p = q.front();
            q.pop();
            const int y = p / m.w, x = p % m.w;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if ((dy == 0 && dx == 0) || ny < 0 || ny >= m.h || nx < 0 || nx >= m.w) continue;
                    const int np = ny * m.w + nx;
                    if (seen[static_cast<std::size_t>(np)] ||
                        m.labels[static_cast<std::size_t>(np)] != m.labels[static_cast<std::size_t>(p)])
                        continue;
                    seen[static_cast<std::size_t>(np)] = true;
                    q.push(np);
                }
        }
    }
    return comps == m.num_segments;
}

void criterion_superpixel() {
    Rng rng(mix64(0x3333));
    auto random_image = [&](int h, int w) {
        std::vector<float> v(static_cast<std::size_t>(h) * w);
        for (auto& x : v) x = static_cast<float>(rng.uniform01());
        return Tensor32::from_data({h, w}, std::move(v));
    };

    struct Setting {
        double scale, sigma;
        int min_size;
    };
    const Setting settings[] = {{20.0, 0.0, 1}, {100.0, 0.8, 6}, {300.0, 0.5, 12}};
    int mismatches = 0;
    for (const auto& s : settings)
        for (int i = 0; i < 50; ++i) {
            auto img = random_image(16, 16);
            FelzParams p;
            p.scale = s.scale;
            p.sigma = s.sigma;
            p.min_size = s.min_size;
            const LabelMap got = felzenszwalb(img, p);
            int h = 0, w = 0;
            const auto pre = felz_preprocess(img, p.sigma, h, w);
            if (got.labels != oracle::felz_reference(pre, h, w, p.scale, p.min_size)) ++mismatches;
        }

    int bad_invariants = 0;
    for (int i = 0; i < 200; ++i) {
        FelzParams p;
        p.scale = rng.uniform(10.0, 400.0);
        p.sigma = rng.uniform01() < 0.5 ? 0.0 : 0.8;
        p.min_size = 1 + static_cast<int>(rng.randint(10));
        if (!labelmap_invariants_ok(felzenszwalb(random_image(16, 16), p))) ++bad_invariants;
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%d oracle mismatches, %d invariant violations",
                  mismatches, bad_invariants);
    report(3, mismatches == 0 && bad_invariants == 0,
           "felzenszwalb equals the naive reference bitwise; partition invariants hold", detail);
}

// ---- criterion 4: convexity & normalization ----

void criterion_convexity() {
    Rng rng(mix64(0x4444));
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const int d = 4 + static_cast<int>(rng.randint(8));
        const int n = 2 + static_cast<int>(rng.randint(10));
        const int hw = 4;
        auto corr = random_tensor(rng, {n, 2, 2});
        const double topk = rng.uniform01() < 0.5 ? 1.0 : rng.uniform(0.2, 1.0);
        auto probs = probability_scores(corr, rng.uniform(0.02, 0.5), topk);
        PrototypeBag<double> bag;
        bag.vectors = random_tensor(rng, {d, n});
        auto agg = aggregate(bag, probs);

        for (int p = 0; p < hw; ++p) {
            double sum = 0.0;
            for (int j = 0; j < n; ++j) sum += probs.data()[static_cast<std::size_t>(j * hw + p)];
            if (std::abs(sum - 1.0) > 1e-6) ++bad;
        }
        for (int j = 0; j < d; ++j) {
            double lo = 1e300, hi = -1e300;
            for (int b = 0; b < n; ++b) {
                lo = std::min(lo, bag.vectors.data()[static_cast<std::size_t>(j * n + b)]);
                hi = std::max(hi, bag.vectors.data()[static_cast<std::size_t>(j * n + b)]);
            }
            for (int p = 0; p < hw; ++p) {
                const double v = agg.data()[static_cast<std::size_t>(j * hw + p)];
                if (v < lo - 1e-9 || v > hi + 1e-9) ++bad;
            }
        }
    }
    report(4, bad == 0, "probability columns sum to 1 and aggregation stays in the convex hull",
           std::to_string(bad) + " violations over 1000 inputs");
}

// ---- criterion 5: centering shift-invariance ----

void criterion_shift_invariance() {
    Rng rng(mix64(0x5555));
    const int d = 12, fh = 4, fw = 4;
    double worst = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        HeadConfig cfg;
        cfg.threshold.mode = seed % 2 == 0 ? Thresholding::kDynamic : Thresholding::kFixed;
        auto sup = random_tensor(rng, {d, fh, fw});
        auto qry = random_tensor(rng, {d, fh, fw});
        auto mask = random_grid_mask(rng, cfg.window * fh, cfg.window * fw, cfg.window);

        std::vector<double> sup_off = sup.data(), qry_off = qry.data();
        for (int p = 0; p < fh * fw; ++p) {
            const double cs = rng.uniform(-2.0, 2.0), cq = rng.uniform(-2.0, 2.0);
            for (int j = 0; j < d; ++j) {
                sup_off[static_cast<std::size_t>(j * fh * fw + p)] += cs;
                qry_off[static_cast<std::size_t>(j * fh * fw + p)] += cq;
            }
        }
        const auto base = head_forward(sup, mask, qry, cfg);
        const auto shifted = head_forward(Tensor64::from_data({d, fh, fw}, sup_off), mask,
                                          Tensor64::from_data({d, fh, fw}, qry_off), cfg);
        for (std::size_t i = 0; i < base.fg_prob.data().size(); ++i) {
            worst = std::max(worst, std::abs(base.fg_prob.data()[i] - shifted.fg_prob.data()[i]));
            worst = std::max(worst,
                             std::abs(base.scores.s_fg.data()[i] - shifted.scores.s_fg.data()[i]));
            worst = std::max(worst,
                             std::abs(base.scores.s_bg.data()[i] - shifted.scores.s_bg.data()[i]));
        }
    }
    char detail[80];
    std::snprintf(detail, sizeof(detail), "max output change %.3g over 50 seeds", worst);
    report(5, worst < 1e-6, "channel-constant offsets leave the head output unchanged", detail);
}

// ---- criteria 6-8: synthetic end-to-end, ablations, determinism ----

struct E2EState {
    fs::path data;
    fs::path default_config;   // the t = 0.05 training config
    fs::path default_run;      // its training output
    fs::path default_records;  // its eval records
    double default_dice = 0.0;
    bool sweep_cleared = false;
    bool loss_decreased = false;
    double predict_dice = 0.0;
    bool predict_ok = false;
    double secs = 0.0;
};

double parse_mean_dice(const fs::path& records) {
    std::ifstream in(records);
    std::string scan, organ, part;
    double value = 0.0, mean = -1.0;
    while (in >> scan >> organ >> part >> value)
        if (part == "mean") mean = value;
    return mean;
}

bool loss_medians_decrease(const fs::path& loss_log, double& early, double& late) {
    std::ifstream in(loss_log);
    std::string line;
    std::vector<double> totals;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long long iter;
        double ssl, ccr, lr;
        ls >> iter >> ssl >> ccr >> lr;
        totals.push_back(ssl + ccr);
    }
    if (totals.size() < 2000) return false;
    auto median = [](std::vector<double> xs) {
        std::sort(xs.begin(), xs.end());
        const std::size_t n = xs.size();
        return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
    };
    early = median({totals.begin(), totals.begin() + 500});
    late = median({totals.begin() + 1500, totals.begin() + 2000});
    return late < early;
}

void write_train_config(const fs::path& path, double temperature) {
    std::ofstream os(path);
    os << "iterations = 2000\n"
       << "seed = 3\n"
       << "data.train_scans = 15\n"
       << "head.temperature = " << format_double(temperature) << "\n";
}

// `predict` with the query equal to the central support slice of the
// held-out support scan.
bool predict_self_match(const E2EState& st, double& dice_out) {
    const DatasetInfo info = load_dataset_info(st.data);
    const std::string support_id = info.scans.back();
    const auto slices = load_scan_slices(info, support_id);
    const auto masks = load_organ_mask_slices(info, support_id, "alpha");

    int z_min = -1, z_max = -1;
    for (int z = 0; z < static_cast<int>(masks.size()); ++z) {
        bool nonempty = false;
        for (float v : masks[static_cast<std::size_t>(z)].data()) nonempty = nonempty || v != 0.0f;
        if (!nonempty) continue;
        if (z_min < 0) z_min = z;
        z_max = z;
    }
    if (z_min < 0) return false;
    const int mid = z_min + (z_max - z_min) / 2;

    write_volume(g_work / "sup_img.cwpv", volume_from_tensor(slices[static_cast<std::size_t>(mid)]));
    Volume m;
    m.dtype = DType::kUint8;
    m.dims = {static_cast<std::uint32_t>(info.image_size),
              static_cast<std::uint32_t>(info.image_size)};
    for (float v : masks[static_cast<std::size_t>(mid)].data()) m.u8.push_back(v != 0.0f ? 1 : 0);
    write_volume(g_work / "sup_mask.cwpv", m);

    const int rc = run_cli("predict --support-img " + (g_work / "sup_img.cwpv").string() +
                           " --support-mask " + (g_work / "sup_mask.cwpv").string() +
                           " --query-img " + (g_work / "sup_img.cwpv").string() + " --ckpt " +
                           (st.default_run / "checkpoint_final.cwpc").string() + " --out " +
                           (g_work / "pred.cwpv").string());
    if (rc != 0) return false;
    const Volume pred = read_volume(g_work / "pred.cwpv");
    std::int64_t inter = 0, pc = 0, gc = 0;
    for (std::size_t i = 0; i < pred.u8.size(); ++i) {
        pc += pred.u8[i] != 0;
        gc += m.u8[i] != 0;
        inter += pred.u8[i] != 0 && m.u8[i] != 0;
    }
    dice_out = pc + gc == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(pc + gc);
    return true;
}

E2EState criterion_end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    E2EState st;
    st.data = g_work / "data";
    fs::remove_all(st.data);

    bool ok =
        run_cli("synth --out " + st.data.string() + " --scans 20 --slices 12 --size 64 --seed 7") == 0;
    ok = ok && run_cli("pseudo-label --data " + st.data.string()) == 0;

    std::string sweep_detail;
    double early = 0.0, late = 0.0;
    const double temps[] = {0.02, 0.05, 0.1, 0.5};
    for (int ti = 0; ok && ti < 4; ++ti) {
        const double t = temps[ti];
        const std::string tag = "t" + std::to_string(ti);
        const fs::path cfg = g_work / ("train_" + tag + ".cfg");
        const fs::path run = g_work / ("run_" + tag);
        const fs::path records = g_work / ("eval_" + tag + ".txt");
        write_train_config(cfg, t);
        fs::remove_all(run);
        if (run_cli("train --data " + st.data.string() + " --config " + cfg.string() + " --out " +
                    run.string()) != 0 ||
            run_cli("eval --data " + st.data.string() + " --ckpt " +
                    (run / "checkpoint_final.cwpc").string() +
                    " --organ alpha --scans 15-19 --records " + records.string()) != 0) {
            ok = false;
            break;
        }
        const double dice = parse_mean_dice(records);
        char buf[48];
        std::snprintf(buf, sizeof(buf), "t=%g: %.3f  ", t, dice);
        sweep_detail += buf;
        if (dice >= 0.60 && !st.sweep_cleared) {
            st.sweep_cleared = true;
            st.loss_decreased = loss_medians_decrease(run / "loss_log.txt", early, late);
        }
        if (t == 0.05) {
            st.default_config = cfg;
            st.default_run = run;
            st.default_records = records;
            st.default_dice = dice;
        }
    }
    if (st.default_run.empty()) ok = false;
    if (ok) st.predict_ok = predict_self_match(st, st.predict_dice);
    st.secs = seconds_since(t0);

    char detail[320];
    std::snprintf(detail, sizeof(detail),
                  "%sloss medians %.4f -> %.4f, predict self-match %.3f, %.0f s",
                  sweep_detail.c_str(), early, late, st.predict_dice, st.secs);
    report(6,
           ok && st.sweep_cleared && st.loss_decreased && st.predict_ok &&
               st.predict_dice >= 0.9 && st.secs < 900.0,
           "synthetic end-to-end mean Dice >= 0.60 with decreasing loss", detail);
    return st;
}

void criterion_ablation_parity(const E2EState& st) {
    if (st.default_run.empty()) {
        report(7, false, "ablation harness parity", "end-to-end stage did not produce a checkpoint");
        return;
    }
    const std::string ckpt = (st.default_run / "checkpoint_final.cwpc").string();
    bool ok = true;

    {
        std::ofstream os(g_work / "allq.txt");
        os << "alpha = TL,TR,BL,BR\nbeta = TL,TR,BL,BR\ngamma = TL,TR,BL,BR\ndelta = TL,TR,BL,BR\n";
    }
    ok = run_cli("eval --data " + st.data.string() + " --ckpt " + ckpt +
                 " --organ alpha --scans 15-19 --quadrant-map " + (g_work / "allq.txt").string() +
                 " --records " + (g_work / "rec_allq.txt").string()) == 0;
    ok = ok && run_cli("eval --data " + st.data.string() + " --ckpt " + ckpt +
                       " --organ alpha --scans 15-19 --no-quadrant-mask --records " +
                       (g_work / "rec_nomask.txt").string()) == 0;
    const bool allq_equal =
        ok && file_text(g_work / "rec_allq.txt") == file_text(g_work / "rec_nomask.txt");

    ok = ok && run_cli("eval --data " + st.data.string() + " --ckpt " + ckpt +
                       " --organ alpha --scans 15-19 --top-k 1.0 --records " +
                       (g_work / "rec_topk.txt").string()) == 0;
    const bool topk_equal =
        ok && file_text(g_work / "rec_topk.txt") == file_text(st.default_records);

    bool never_lower = true;
    for (const std::string organ : {"alpha", "beta"}) {
        const fs::path rm = g_work / ("rec_m_" + organ + ".txt");
        const fs::path ru = g_work / ("rec_u_" + organ + ".txt");
        ok = ok && run_cli("eval --data " + st.data.string() + " --ckpt " + ckpt + " --organ " +
                           organ + " --scans 15-19 --records " + rm.string()) == 0;
        ok = ok &&
             run_cli("eval --data " + st.data.string() + " --ckpt " + ckpt + " --organ " + organ +
                     " --scans 15-19 --no-quadrant-mask --records " + ru.string()) == 0;
        std::ifstream mi(rm), ui(ru);
        std::string ms, mo, mp, us, uo, up;
        double mv = 0.0, uv = 0.0;
        while (mi >> ms >> mo >> mp >> mv && ui >> us >> uo >> up >> uv)
            if (mp == "all" && mv < uv - 1e-12) never_lower = false;
    }

    const std::string detail = std::string("all-quadrants==unmasked: ") + (allq_equal ? "yes" : "NO") +
                               ", top-k 100%==unfiltered: " + (topk_equal ? "yes" : "NO") +
                               ", masking never lowers Dice: " + (never_lower ? "yes" : "NO");
    report(7, ok && allq_equal && topk_equal && never_lower, "ablation harness parity", detail);
}

void criterion_determinism(const E2EState& st) {
    if (st.default_run.empty()) {
        report(8, false, "bitwise determinism", "end-to-end stage did not produce a checkpoint");
        return;
    }
    const fs::path rerun = g_work / "run_repeat";
    fs::remove_all(rerun);
    bool ok = run_cli("train --data " + st.data.string() + " --config " +
                      st.default_config.string() + " --out " + rerun.string()) == 0;
    const bool ckpt_equal = ok && file_bytes(st.default_run / "checkpoint_final.cwpc") ==
                                      file_bytes(rerun / "checkpoint_final.cwpc");
    bool records_equal = false;
    if (ok) {
        ok = run_cli("eval --data " + st.data.string() + " --ckpt " +
                     (rerun / "checkpoint_final.cwpc").string() +
                     " --organ alpha --scans 15-19 --records " +
                     (g_work / "rec_repeat.txt").string()) == 0;
        records_equal =
            ok && file_text(g_work / "rec_repeat.txt") == file_text(st.default_records);
    }
    report(8, ok && ckpt_equal && records_equal, "two identical runs match bitwise",
           std::string("checkpoints ") + (ckpt_equal ? "equal" : "DIFFER") + ", reports " +
               (records_equal ? "equal" : "DIFFER"));
}

void criterion_lr_schedule() {
    const bool ok = lr_schedule(1e-3, 0.95, 0) == 1e-3 && lr_schedule(1e-3, 0.95, 999) == 1e-3 &&
                    lr_schedule(1e-3, 0.95, 1000) == 1e-3 * 0.95 &&
                    lr_schedule(1e-3, 0.95, 5000) == 1e-3 * std::pow(0.95, 5.0);
    report(9, ok, "learning-rate schedule matches the closed form at {0, 999, 1000, 5000}", "");
}

}  // namespace

int main(int argc, char** argv) {
    g_work = fs::temp_directory_path() / "cowpro_acceptance";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--cli") g_cli = argv[i + 1];
        if (flag == "--workdir") g_work = argv[i + 1];
    }
    if (g_cli.empty()) {
        std::cerr << "usage: acceptance --cli <path-to-cowpro> [--workdir DIR]\n";
        return 64;
    }
    fs::create_directories(g_work);
    std::ofstream(g_work / "cli_log.txt", std::ios::trunc).close();

    criterion_gradients();
    criterion_head_oracle();
    criterion_superpixel();
    criterion_convexity();
    criterion_shift_invariance();
    const E2EState st = criterion_end_to_end();
    criterion_ablation_parity(st);
    criterion_determinism(st);
    criterion_lr_schedule();

    std::cout << (g_failures == 0 ? "all criteria passed"
                                  : std::to_string(g_failures) + " criteria failed")
              << std::endl;
    return g_failures;
}
