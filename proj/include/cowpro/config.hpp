#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cowpro/encoder.hpp"
#include "cowpro/head.hpp"
#include "cowpro/transforms.hpp"

// Plain-text `key = value` configuration. Dotted keys express nesting,
// `#` starts a comment and unknown keys are a hard error so typos cannot
// silently fall back to defaults.

namespace cowpro {

struct KeyValues {
    std::vector<std::pair<std::string, std::string>> items;

    void set(const std::string& key, const std::string& value);
    const std::string* find(const std::string& key) const;
    std::string to_text() const;
};

KeyValues parse_key_values(const std::string& text);
KeyValues load_config_file(const std::filesystem::path& path);

std::string format_double(double v);  // round-trip exact

// Typed access that tracks which keys were consumed; finish() rejects
// anything left over.
class ConfigReader {
public:
    explicit ConfigReader(const KeyValues& kv) : kv_(kv) {}

    bool has(const std::string& key);
    double get_double(const std::string& key, double fallback);
    int get_int(const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::string get_string(const std::string& key, const std::string& fallback);
    std::array<int, 4> get_int4(const std::string& key, const std::array<int, 4>& fallback);
    void finish() const;

private:
    const KeyValues& kv_;
    std::set<std::string> consumed_;
};

struct TransformRanges {
    GeoRanges geo;
    IntRanges intensity;
};

// Every tunable of the pipeline. Serializes to the same key=value grammar;
// the checkpoint embeds the serialized form so evaluation replays the exact
// training-time settings.
struct TrainConfig {
    int iterations = 2000;
    double lr0 = 1e-3;
    double decay = 0.95;  // per 1000 iterations
    double class_weight_bg = 0.05;
    double class_weight_fg = 1.0;
    bool ccr_enabled = true;
    double ccr_threshold = 0.95;
    std::uint64_t seed = 1;
    int checkpoint_interval = 500;
    int min_fg_pixels = 0;  // <= 0: area-scaled default (100 at 256x256)
    int train_scans = -1;   // < 0: all scans in the manifest
    std::string slice_pool = "all";  // all | upper | lower
    HeadConfig head;
    EncoderConfig encoder;
    TransformRanges transforms;

    void validate() const;
    static TrainConfig from_kv(const KeyValues& kv);
    KeyValues to_kv() const;
};

enum class Quadrant { kTL, kTR, kBL, kBR };

struct QuadrantMap {
    // Organs absent from the map pass through unmasked.
    std::vector<std::pair<std::string, std::vector<Quadrant>>> organs;

    const std::vector<Quadrant>* find(const std::string& organ) const;
};

QuadrantMap parse_quadrant_map(const KeyValues& kv);
KeyValues quadrant_map_to_kv(const QuadrantMap& qmap);
QuadrantMap all_quadrants_map(const std::vector<std::string>& organs);

}  // namespace cowpro
