#include "cowpro/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cowpro/io.hpp"

namespace cowpro {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

std::string join_csv(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    return out;
}

std::filesystem::path scan_dir(const DatasetInfo& info, const std::string& scan_id) {
    return info.root / "scans" / scan_id;
}

Volume read_scan_volume(const DatasetInfo& info, const std::string& scan_id,
                        const std::string& file, int expect_z) {
    const auto path = scan_dir(info, scan_id) / file;
    Volume v = read_volume(path);
    require(v.dims.size() == 3, "volume " + path.string() + " must be [Z,H,W]");
    require(static_cast<int>(v.dims[0]) == expect_z &&
                static_cast<int>(v.dims[1]) == info.image_size &&
                static_cast<int>(v.dims[2]) == info.image_size,
            "volume " + path.string() + " does not match the manifest geometry");
    return v;
}

}  // namespace

DatasetInfo load_dataset_info(const std::filesystem::path& root) {
    const KeyValues kv = load_config_file(root / "manifest.txt");
    ConfigReader r(kv);
    DatasetInfo info;
    info.root = root;
    info.image_size = r.get_int("image_size", 0);
    info.slices_per_scan = r.get_int("slices_per_scan", 0);
    info.pool_split = r.get_int("pool_split", 0);
    info.scans = split_csv(r.get_string("scans", ""));
    info.organs = split_csv(r.get_string("organs", ""));
    r.finish();
    require(info.image_size > 0 && info.slices_per_scan > 0, "manifest: bad geometry");
    require(!info.scans.empty(), "manifest: no scans listed");
    require(info.pool_split >= 0 && info.pool_split <= info.slices_per_scan,
            "manifest: pool_split out of range");
    return info;
}

void save_dataset_info(const DatasetInfo& info) {
    KeyValues kv;
    kv.set("image_size", std::to_string(info.image_size));
    kv.set("slices_per_scan", std::to_string(info.slices_per_scan));
    kv.set("pool_split", std::to_string(info.pool_split));
    kv.set("scans", join_csv(info.scans));
    kv.set("organs", join_csv(info.organs));
    std::filesystem::create_directories(info.root);
    std::ofstream os(info.root / "manifest.txt");
    if (!os) throw IoError("cannot write " + (info.root / "manifest.txt").string());
    os << kv.to_text();
}

std::vector<Tensor32> load_scan_slices(const DatasetInfo& info, const std::string& scan_id) {
    const Volume v = read_scan_volume(info, scan_id, "image.cwpv", info.slices_per_scan);
    require(v.dtype == DType::kFloat32, "image volume must be float32");
    const int s = info.image_size;
    const std::size_t plane = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    std::vector<Tensor32> slices;
    for (int z = 0; z < info.slices_per_scan; ++z) {
        std::vector<float> data(v.f32.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(z)),
                                v.f32.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(z + 1)));
        float lo = data[0], hi = data[0];
        for (float x : data) {
            require(std::isfinite(x), "image volume contains non-finite values");
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        if (hi > lo) {
            const float inv = 1.0f / (hi - lo);
            for (auto& x : data) x = (x - lo) * inv;
        } else {
            std::fill(data.begin(), data.end(), 0.0f);
        }
        slices.push_back(Tensor32::from_data({s, s}, std::move(data)));
    }
    return slices;
}

bool has_organ(const DatasetInfo& info, const std::string& scan_id, const std::string& organ) {
    return std::filesystem::exists(scan_dir(info, scan_id) / ("mask_" + organ + ".cwpv"));
}

std::vector<Tensor32> load_organ_mask_slices(const DatasetInfo& info, const std::string& scan_id,
                                             const std::string& organ) {
    const Volume v = read_scan_volume(info, scan_id, "mask_" + organ + ".cwpv", info.slices_per_scan);
    require(v.dtype == DType::kUint8, "mask volume must be uint8");
    const int s = info.image_size;
    const std::size_t plane = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    std::vector<Tensor32> slices;
    for (int z = 0; z < info.slices_per_scan; ++z) {
        std::vector<float> data(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            const std::uint8_t b = v.u8[plane * static_cast<std::size_t>(z) + i];
            require(b <= 1, "mask volume must be binary");
            data[i] = static_cast<float>(b);
        }
        slices.push_back(Tensor32::from_data({s, s}, std::move(data)));
    }
    return slices;
}

std::vector<LabelMap> load_label_maps(const DatasetInfo& info, const std::string& scan_id) {
    const auto path = scan_dir(info, scan_id) / "labels.cwpv";
    if (!std::filesystem::exists(path))
        throw IoError("missing pseudo-labels " + path.string() + " (run the pseudo-label step first)");
    const Volume v = read_scan_volume(info, scan_id, "labels.cwpv", info.slices_per_scan);
    require(v.dtype == DType::kFloat32, "label volume must be float32");
    const int s = info.image_size;
    const std::size_t plane = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    std::vector<LabelMap> maps;
    for (int z = 0; z < info.slices_per_scan; ++z) {
        LabelMap m;
        m.h = s;
        m.w = s;
        m.labels.resize(plane);
        int max_id = -1;
        for (std::size_t i = 0; i < plane; ++i) {
            const float f = v.f32[plane * static_cast<std::size_t>(z) + i];
            const int id = static_cast<int>(std::lround(f));
            require(id >= 0 && std::abs(f - static_cast<float>(id)) < 1e-3f,
                    "label volume holds non-integer ids");
            m.labels[i] = id;
            max_id = std::max(max_id, id);
        }
        m.num_segments = max_id + 1;
        maps.push_back(std::move(m));
    }
    return maps;
}

void save_label_maps(const DatasetInfo& info, const std::string& scan_id,
                     const std::vector<LabelMap>& maps) {
    require(static_cast<int>(maps.size()) == info.slices_per_scan,
            "save_label_maps: slice count mismatch");
    const int s = info.image_size;
    Volume v;
    v.dtype = DType::kFloat32;
    v.dims = {static_cast<std::uint32_t>(maps.size()), static_cast<std::uint32_t>(s),
              static_cast<std::uint32_t>(s)};
    v.f32.reserve(static_cast<std::size_t>(v.count()));
    for (const auto& m : maps) {
        require(m.h == s && m.w == s, "save_label_maps: geometry mismatch");
        for (int id : m.labels) v.f32.push_back(static_cast<float>(id));
    }
    write_volume(scan_dir(info, scan_id) / "labels.cwpv", v);
}

QuadrantMap load_quadrant_map(const std::filesystem::path& path) {
    return parse_quadrant_map(load_config_file(path));
}

}  // namespace cowpro
