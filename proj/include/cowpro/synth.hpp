#pragma once

#include <cstdint>
#include <filesystem>

#include "cowpro/dataset.hpp"

namespace cowpro {

// Synthetic abdominal stand-in: each scan holds 2-4 ellipsoidal "organs"
// (bright or dark blobs with per-scan jitter) over a textured background,
// with ground-truth masks, a manifest, and a quadrant map derived from the
// generated ground truth. Deterministic in the seed.
DatasetInfo synth_dataset(const std::filesystem::path& out_dir, int n_scans, int slices_per_scan,
                          int image_size, std::uint64_t seed);

}  // namespace cowpro
