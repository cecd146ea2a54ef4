#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cowpro/config.hpp"
#include "cowpro/tensor.hpp"

// One-shot validation without fine-tuning: the support scan's organ range is
// split into three parts, each part contributes its middle slice as the
// support, every query slice in the matching part is predicted against it,
// predictions are quadrant-masked, and volume Dice is reported per scan.

namespace cowpro {

struct ScanVolume {
    std::string scan_id;
    std::vector<Tensor32> slices;  // [H,W] each
    std::map<std::string, std::vector<Tensor32>> organ_masks;
};

// support image, support mask, query image -> binary prediction, all [H,W].
using SlicePredictor =
    std::function<Tensor32(const Tensor32&, const Tensor32&, const Tensor32&)>;

// 2|A^B| / (|A|+|B|); two empty masks count as a perfect match.
double dice(const Tensor32& a, const Tensor32& b);
double dice_volume(const std::vector<Tensor32>& a, const std::vector<Tensor32>& b);

// Zero everything outside the organ's allowed quadrants; organs absent from
// the map pass through untouched.
Tensor32 quadrant_mask(const Tensor32& pred, const std::string& organ, const QuadrantMap& qmap);

struct PartRange {
    int begin = 0;
    int count = 0;

    int middle() const { return begin + (count - 1) / 2; }
    bool empty() const { return count == 0; }
};

// Split [0,n) into three contiguous parts, remainder to the earlier parts.
std::array<PartRange, 3> split_three(int n);

struct EvalEntry {
    std::string scan_id;
    std::string organ;
    int part = -1;  // -1: whole-volume entry
    double dice_value = 0.0;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    std::vector<int> support_slices;  // absolute indices in the support scan
    std::vector<std::string> notes;
    double mean_dice = 0.0;  // mean of the per-scan volume entries

    std::string to_text() const;
    std::string to_records() const;
};

EvalReport one_shot_eval(const ScanVolume& support_scan, const std::vector<ScanVolume>& query_scans,
                         const std::string& organ, const SlicePredictor& predict,
                         const QuadrantMap& qmap, bool use_quadrants);

}  // namespace cowpro
