#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cowpro/config.hpp"
#include "cowpro/superpixel.hpp"
#include "cowpro/tensor.hpp"

// On-disk dataset layout:
//   root/manifest.txt                  image_size, slices_per_scan, scans, organs, pool_split
//   root/quadrants.txt                 organ -> allowed quadrants
//   root/scans/<id>/image.cwpv         f32 [Z,H,W] in [0,1]
//   root/scans/<id>/mask_<organ>.cwpv  u8  [Z,H,W]
//   root/scans/<id>/labels.cwpv        f32 [Z,H,W] superpixel ids (pseudo-label output)

namespace cowpro {

struct DatasetInfo {
    std::filesystem::path root;
    int image_size = 0;
    int slices_per_scan = 0;
    // Slice indices below pool_split form the "upper" pool, the rest "lower".
    int pool_split = 0;
    std::vector<std::string> scans;
    std::vector<std::string> organs;
};

DatasetInfo load_dataset_info(const std::filesystem::path& root);
void save_dataset_info(const DatasetInfo& info);

// Slices are returned min-max normalized to [0,1].
std::vector<Tensor32> load_scan_slices(const DatasetInfo& info, const std::string& scan_id);
std::vector<Tensor32> load_organ_mask_slices(const DatasetInfo& info, const std::string& scan_id,
                                             const std::string& organ);
bool has_organ(const DatasetInfo& info, const std::string& scan_id, const std::string& organ);

std::vector<LabelMap> load_label_maps(const DatasetInfo& info, const std::string& scan_id);
void save_label_maps(const DatasetInfo& info, const std::string& scan_id,
                     const std::vector<LabelMap>& maps);

QuadrantMap load_quadrant_map(const std::filesystem::path& path);

}  // namespace cowpro
