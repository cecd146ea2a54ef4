#include "cowpro/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cowpro {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

}  // namespace

void KeyValues::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : items)
        if (k == key) {
            v = value;
            return;
        }
    items.emplace_back(key, value);
}

const std::string* KeyValues::find(const std::string& key) const {
    for (const auto& [k, v] : items)
        if (k == key) return &v;
    return nullptr;
}

std::string KeyValues::to_text() const {
    std::string out;
    for (const auto& [k, v] : items) out += k + " = " + v + "\n";
    return out;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.find(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key `" + key + "`");
        kv.set(key, value);
    }
    return kv;
}

KeyValues load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool ConfigReader::has(const std::string& key) { return kv_.find(key) != nullptr; }

double ConfigReader::get_double(const std::string& key, double fallback) {
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    consumed_.insert(key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key `" + key + "`: expected a number, got `" + *v + "`");
    }
}

int ConfigReader::get_int(const std::string& key, int fallback) {
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    consumed_.insert(key);
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("");
        return static_cast<int>(i);
    } catch (const std::exception&) {
        throw ConfigError("config key `" + key + "`: expected an integer, got `" + *v + "`");
    }
}

std::uint64_t ConfigReader::get_u64(const std::string& key, std::uint64_t fallback) {
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    consumed_.insert(key);
    try {
        std::size_t pos = 0;
        const unsigned long long i = std::stoull(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("");
        return static_cast<std::uint64_t>(i);
    } catch (const std::exception&) {
        throw ConfigError("config key `" + key + "`: expected an unsigned integer, got `" + *v + "`");
    }
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    consumed_.insert(key);
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ConfigError("config key `" + key + "`: expected true/false, got `" + *v + "`");
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    consumed_.insert(key);
    return *v;
}

std::array<int, 4> ConfigReader::get_int4(const std::string& key, const std::array<int, 4>& fallback) {
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    consumed_.insert(key);
    const auto parts = split_list(*v);
    if (parts.size() != 4)
        throw ConfigError("config key `" + key + "`: expected 4 comma-separated integers");
    std::array<int, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        try {
            std::size_t pos = 0;
            out[i] = static_cast<int>(std::stoll(parts[i], &pos));
            if (pos != parts[i].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError("config key `" + key + "`: expected integers, got `" + *v + "`");
        }
    }
    return out;
}

void ConfigReader::finish() const {
    for (const auto& [k, v] : kv_.items)
        if (!consumed_.count(k)) throw ConfigError("unknown config key `" + k + "`");
}

void TrainConfig::validate() const {
    require(iterations >= 1, "config: iterations must be >= 1");
    require(lr0 > 0.0, "config: lr0 must be > 0");
    require(decay > 0.0 && decay <= 1.0, "config: lr_decay must lie in (0,1]");
    require(class_weight_bg > 0.0 && class_weight_fg > 0.0, "config: class weights must be > 0");
    require(ccr_threshold > 0.0 && ccr_threshold <= 1.0, "config: ccr.threshold must lie in (0,1]");
    require(checkpoint_interval >= 1, "config: checkpoint_interval must be >= 1");
    require(slice_pool == "all" || slice_pool == "upper" || slice_pool == "lower",
            "config: data.slice_pool must be all/upper/lower");
    head.validate();
    encoder.validate();
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
    ConfigReader r(kv);
    TrainConfig c;
    c.iterations = r.get_int("iterations", c.iterations);
    c.lr0 = r.get_double("lr0", c.lr0);
    c.decay = r.get_double("lr_decay", c.decay);
    c.class_weight_bg = r.get_double("class_weight_bg", c.class_weight_bg);
    c.class_weight_fg = r.get_double("class_weight_fg", c.class_weight_fg);
    c.ccr_enabled = r.get_bool("ccr.enabled", c.ccr_enabled);
    c.ccr_threshold = r.get_double("ccr.threshold", c.ccr_threshold);
    c.seed = r.get_u64("seed", c.seed);
    c.checkpoint_interval = r.get_int("checkpoint_interval", c.checkpoint_interval);
    c.min_fg_pixels = r.get_int("pseudo.min_fg_pixels", c.min_fg_pixels);
    c.train_scans = r.get_int("data.train_scans", c.train_scans);
    c.slice_pool = r.get_string("data.slice_pool", c.slice_pool);

    c.head.temperature = r.get_double("head.temperature", c.head.temperature);
    c.head.window = r.get_int("head.window", c.head.window);
    const std::string mode = r.get_string(
        "head.threshold", c.head.threshold.mode == Thresholding::kFixed ? "fixed" : "dynamic");
    if (mode == "fixed")
        c.head.threshold.mode = Thresholding::kFixed;
    else if (mode == "dynamic")
        c.head.threshold.mode = Thresholding::kDynamic;
    else
        throw ConfigError("config key `head.threshold`: expected fixed/dynamic, got `" + mode + "`");
    c.head.threshold.fixed_value = r.get_double("head.fixed_value", c.head.threshold.fixed_value);
    c.head.top_k_fraction = r.get_double("head.top_k_fraction", c.head.top_k_fraction);
    const std::string sim = r.get_string(
        "head.similarity", c.head.similarity == Similarity::kDot ? "dot" : "cosine");
    if (sim == "cosine")
        c.head.similarity = Similarity::kCosine;
    else if (sim == "dot")
        c.head.similarity = Similarity::kDot;
    else
        throw ConfigError("config key `head.similarity`: expected cosine/dot, got `" + sim + "`");
    c.head.logit_scale = r.get_double("head.logit_scale", c.head.logit_scale);
    c.head.include_global = r.get_bool("head.include_global", c.head.include_global);

    c.encoder.in_channels = r.get_int("encoder.in_channels", c.encoder.in_channels);
    c.encoder.feature_dim = r.get_int("encoder.feature_dim", c.encoder.feature_dim);
    c.encoder.block_channels = r.get_int4("encoder.block_channels", c.encoder.block_channels);
    c.encoder.dilations = r.get_int4("encoder.dilations", c.encoder.dilations);
    c.encoder.strides = r.get_int4("encoder.strides", c.encoder.strides);

    auto& g = c.transforms.geo;
    g.rotation_deg = r.get_double("transforms.rotation_deg", g.rotation_deg);
    g.translation = r.get_double("transforms.translation", g.translation);
    g.scale_min = r.get_double("transforms.scale_min", g.scale_min);
    g.scale_max = r.get_double("transforms.scale_max", g.scale_max);
    g.shear_deg = r.get_double("transforms.shear_deg", g.shear_deg);
    g.elastic_alpha = r.get_double("transforms.elastic_alpha", g.elastic_alpha);
    g.elastic_sigma = r.get_double("transforms.elastic_sigma", g.elastic_sigma);
    auto& it = c.transforms.intensity;
    it.gamma_min = r.get_double("transforms.gamma_min", it.gamma_min);
    it.gamma_max = r.get_double("transforms.gamma_max", it.gamma_max);

    r.finish();
    c.validate();
    return c;
}

KeyValues TrainConfig::to_kv() const {
    KeyValues kv;
    kv.set("iterations", std::to_string(iterations));
    kv.set("lr0", format_double(lr0));
    kv.set("lr_decay", format_double(decay));
    kv.set("class_weight_bg", format_double(class_weight_bg));
    kv.set("class_weight_fg", format_double(class_weight_fg));
    kv.set("ccr.enabled", ccr_enabled ? "true" : "false");
    kv.set("ccr.threshold", format_double(ccr_threshold));
    kv.set("seed", std::to_string(seed));
    kv.set("checkpoint_interval", std::to_string(checkpoint_interval));
    kv.set("pseudo.min_fg_pixels", std::to_string(min_fg_pixels));
    kv.set("data.train_scans", std::to_string(train_scans));
    kv.set("data.slice_pool", slice_pool);

    kv.set("head.temperature", format_double(head.temperature));
    kv.set("head.window", std::to_string(head.window));
    kv.set("head.threshold", head.threshold.mode == Thresholding::kFixed ? "fixed" : "dynamic");
    kv.set("head.fixed_value", format_double(head.threshold.fixed_value));
    kv.set("head.top_k_fraction", format_double(head.top_k_fraction));
    kv.set("head.similarity", head.similarity == Similarity::kDot ? "dot" : "cosine");
    kv.set("head.logit_scale", format_double(head.logit_scale));
    kv.set("head.include_global", head.include_global ? "true" : "false");

    auto int4 = [](const std::array<int, 4>& a) {
        return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) + "," +
               std::to_string(a[3]);
    };
    kv.set("encoder.in_channels", std::to_string(encoder.in_channels));
    kv.set("encoder.feature_dim", std::to_string(encoder.feature_dim));
    kv.set("encoder.block_channels", int4(encoder.block_channels));
    kv.set("encoder.dilations", int4(encoder.dilations));
    kv.set("encoder.strides", int4(encoder.strides));

    kv.set("transforms.rotation_deg", format_double(transforms.geo.rotation_deg));
    kv.set("transforms.translation", format_double(transforms.geo.translation));
    kv.set("transforms.scale_min", format_double(transforms.geo.scale_min));
    kv.set("transforms.scale_max", format_double(transforms.geo.scale_max));
    kv.set("transforms.shear_deg", format_double(transforms.geo.shear_deg));
    kv.set("transforms.elastic_alpha", format_double(transforms.geo.elastic_alpha));
    kv.set("transforms.elastic_sigma", format_double(transforms.geo.elastic_sigma));
    kv.set("transforms.gamma_min", format_double(transforms.intensity.gamma_min));
    kv.set("transforms.gamma_max", format_double(transforms.intensity.gamma_max));
    return kv;
}

const std::vector<Quadrant>* QuadrantMap::find(const std::string& organ) const {
    for (const auto& [name, quads] : organs)
        if (name == organ) return &quads;
    return nullptr;
}

QuadrantMap parse_quadrant_map(const KeyValues& kv) {
    QuadrantMap qmap;
    for (const auto& [organ, value] : kv.items) {
        std::vector<Quadrant> quads;
        for (const std::string& part : split_list(value)) {
            if (part == "TL")
                quads.push_back(Quadrant::kTL);
            else if (part == "TR")
                quads.push_back(Quadrant::kTR);
            else if (part == "BL")
                quads.push_back(Quadrant::kBL);
            else if (part == "BR")
                quads.push_back(Quadrant::kBR);
            else
                throw ConfigError("quadrant map: organ `" + organ + "` has unknown quadrant `" +
                                  part + "`");
        }
        if (quads.empty())
            throw ConfigError("quadrant map: organ `" + organ + "` has an empty quadrant set");
        qmap.organs.emplace_back(organ, std::move(quads));
    }
    return qmap;
}

KeyValues quadrant_map_to_kv(const QuadrantMap& qmap) {
    KeyValues kv;
    for (const auto& [organ, quads] : qmap.organs) {
        std::string v;
        for (std::size_t i = 0; i < quads.size(); ++i) {
            if (i) v += ",";
            switch (quads[i]) {
                case Quadrant::kTL: v += "TL"; break;
                case Quadrant::kTR: v += "TR"; break;
                case Quadrant::kBL: v += "BL"; break;
                case Quadrant::kBR: v += "BR"; break;
            }
        }
        kv.set(organ, v);
    }
    return kv;
}

QuadrantMap all_quadrants_map(const std::vector<std::string>& organs) {
    QuadrantMap qmap;
    for (const auto& organ : organs)
        qmap.organs.emplace_back(
            organ, std::vector<Quadrant>{Quadrant::kTL, Quadrant::kTR, Quadrant::kBL, Quadrant::kBR});
    return qmap;
}

}  // namespace cowpro
