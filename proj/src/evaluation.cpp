#include "cowpro/evaluation.hpp"

#include <cmath>
#include <cstdio>

namespace cowpro {

namespace {

struct DiceCounts {
    std::int64_t intersection = 0;
    std::int64_t a_count = 0;
    std::int64_t b_count = 0;

    void absorb(const Tensor32& a, const Tensor32& b) {
        for (std::size_t i = 0; i < a.data().size(); ++i) {
            const bool av = a.data()[i] != 0.0f;
            const bool bv = b.data()[i] != 0.0f;
            intersection += av && bv;
            a_count += av;
            b_count += bv;
        }
    }

    double value() const {
        if (a_count + b_count == 0) return 1.0;
        return 2.0 * static_cast<double>(intersection) / static_cast<double>(a_count + b_count);
    }
};

// Inclusive slice range where the organ is present; {-1,-1} when absent.
std::pair<int, int> organ_z_range(const std::vector<Tensor32>& mask_slices) {
    int z_min = -1, z_max = -1;
    for (std::size_t z = 0; z < mask_slices.size(); ++z) {
        bool nonempty = false;
        for (float v : mask_slices[z].data())
            if (v != 0.0f) {
                nonempty = true;
                break;
            }
        if (!nonempty) continue;
        if (z_min < 0) z_min = static_cast<int>(z);
        z_max = static_cast<int>(z);
    }
    return {z_min, z_max};
}

}  // namespace

double dice(const Tensor32& a, const Tensor32& b) {
    require(a.shape() == b.shape(), "dice: shape mismatch " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
    DiceCounts c;
    c.absorb(a, b);
    return c.value();
}

double dice_volume(const std::vector<Tensor32>& a, const std::vector<Tensor32>& b) {
    require(a.size() == b.size(), "dice_volume: slice count mismatch");
    DiceCounts c;
    for (std::size_t i = 0; i < a.size(); ++i) {
        require(a[i].shape() == b[i].shape(), "dice_volume: slice shape mismatch");
        c.absorb(a[i], b[i]);
    }
    return c.value();
}

Tensor32 quadrant_mask(const Tensor32& pred, const std::string& organ, const QuadrantMap& qmap) {
    require(pred.rank() == 2, "quadrant_mask: prediction must be [H,W]");
    require(pred.dim(0) % 2 == 0 && pred.dim(1) % 2 == 0,
            "quadrant_mask: extents must be even, got " + shape_str(pred.shape()));
    const std::vector<Quadrant>* allowed = qmap.find(organ);
    if (!allowed) return pred;

    const int h = pred.dim(0), w = pred.dim(1);
    bool keep[4] = {false, false, false, false};
    for (Quadrant q : *allowed) keep[static_cast<int>(q)] = true;
    std::vector<float> out(pred.data());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int q = (y >= h / 2 ? 2 : 0) + (x >= w / 2 ? 1 : 0);
            if (!keep[q]) out[static_cast<std::size_t>(y * w + x)] = 0.0f;
        }
    return Tensor32::from_data(pred.shape(), std::move(out));
}

std::array<PartRange, 3> split_three(int n) {
    require(n >= 0, "split_three: negative range");
    const int q = n / 3, r = n % 3;
    std::array<PartRange, 3> parts;
    int begin = 0;
    for (int i = 0; i < 3; ++i) {
        const int count = q + (i < r ? 1 : 0);
        parts[static_cast<std::size_t>(i)] = {begin, count};
        begin += count;
    }
    return parts;
}

std::string EvalReport::to_text() const {
    std::string out;
    char buf[160];
    out += "scan        organ     part  dice\n";
    for (const auto& e : entries) {
        if (e.part >= 0)
            std::snprintf(buf, sizeof(buf), "%-11s %-9s %-5d %.4f\n", e.scan_id.c_str(),
                          e.organ.c_str(), e.part, e.dice_value);
        else
            std::snprintf(buf, sizeof(buf), "%-11s %-9s all   %.4f\n", e.scan_id.c_str(),
                          e.organ.c_str(), e.dice_value);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean dice: %.4f\n", mean_dice);
    out += buf;
    out += "support slices:";
    for (int s : support_slices) out += " " + std::to_string(s);
    out += "\n";
    for (const auto& n : notes) out += "note: " + n + "\n";
    return out;
}

std::string EvalReport::to_records() const {
    std::string out;
    char buf[160];
    for (const auto& e : entries) {
        if (e.part >= 0)
            std::snprintf(buf, sizeof(buf), "%s\t%s\t%d\t%.6f\n", e.scan_id.c_str(),
                          e.organ.c_str(), e.part, e.dice_value);
        else
            std::snprintf(buf, sizeof(buf), "%s\t%s\tall\t%.6f\n", e.scan_id.c_str(),
                          e.organ.c_str(), e.dice_value);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "*\t%s\tmean\t%.6f\n", entries.empty() ? "-" : entries[0].organ.c_str(),
                  mean_dice);
    out += buf;
    return out;
}

EvalReport one_shot_eval(const ScanVolume& support_scan, const std::vector<ScanVolume>& query_scans,
                         const std::string& organ, const SlicePredictor& predict,
                         const QuadrantMap& qmap, bool use_quadrants) {
    EvalReport report;

    const auto sup_it = support_scan.organ_masks.find(organ);
    require(sup_it != support_scan.organ_masks.end(),
            "eval: organ " + organ + " missing from support scan " + support_scan.scan_id);
    const auto [sup_zmin, sup_zmax] = organ_z_range(sup_it->second);
    require(sup_zmin >= 0, "eval: organ " + organ + " empty in support scan " + support_scan.scan_id);

    const auto sup_parts = split_three(sup_zmax - sup_zmin + 1);
    std::array<int, 3> support_idx{};
    for (int p = 0; p < 3; ++p) {
        if (sup_parts[static_cast<std::size_t>(p)].empty()) {
            // degenerate support range (< 3 slices): fall back to its middle
            support_idx[static_cast<std::size_t>(p)] = sup_zmin + (sup_zmax - sup_zmin) / 2;
            report.notes.push_back("support part " + std::to_string(p) +
                                   " empty; using the range middle");
        } else {
            support_idx[static_cast<std::size_t>(p)] =
                sup_zmin + sup_parts[static_cast<std::size_t>(p)].middle();
        }
        report.support_slices.push_back(support_idx[static_cast<std::size_t>(p)]);
    }

    double dice_sum = 0.0;
    int scans_evaluated = 0;
    for (const auto& scan : query_scans) {
        const auto it = scan.organ_masks.find(organ);
        if (it == scan.organ_masks.end()) {
            report.notes.push_back("scan " + scan.scan_id + " skipped: organ " + organ + " absent");
            continue;
        }
        const auto [zmin, zmax] = organ_z_range(it->second);
        if (zmin < 0) {
            report.notes.push_back("scan " + scan.scan_id + " skipped: organ " + organ + " empty");
            continue;
        }
        const auto parts = split_three(zmax - zmin + 1);
        DiceCounts scan_counts;
        for (int p = 0; p < 3; ++p) {
            const PartRange& part = parts[static_cast<std::size_t>(p)];
            if (part.empty()) continue;
            const int sup_z = support_idx[static_cast<std::size_t>(p)];
            const Tensor32& sup_img = support_scan.slices[static_cast<std::size_t>(sup_z)];
            const Tensor32& sup_mask = sup_it->second[static_cast<std::size_t>(sup_z)];
            DiceCounts part_counts;
            for (int i = 0; i < part.count; ++i) {
                const int z = zmin + part.begin + i;
                Tensor32 pred = predict(sup_img, sup_mask, scan.slices[static_cast<std::size_t>(z)]);
                if (use_quadrants) pred = quadrant_mask(pred, organ, qmap);
                part_counts.absorb(pred, it->second[static_cast<std::size_t>(z)]);
            }
            scan_counts.intersection += part_counts.intersection;
            scan_counts.a_count += part_counts.a_count;
            scan_counts.b_count += part_counts.b_count;
            report.entries.push_back({scan.scan_id, organ, p, part_counts.value()});
        }
        report.entries.push_back({scan.scan_id, organ, -1, scan_counts.value()});
        dice_sum += scan_counts.value();
        ++scans_evaluated;
    }
    report.mean_dice = scans_evaluated > 0 ? dice_sum / scans_evaluated : 0.0;
    return report;
}

}  // namespace cowpro
