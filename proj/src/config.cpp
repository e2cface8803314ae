#include "tipscan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "tipscan/error.hpp"
#include "tipscan/image_io.hpp"

namespace tipscan {

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"run.seed", "0", "global seed; every stage derives its own stream from it"},
        {"run.jobs", "1", "CPU worker cap"},
        {"paths.data_dir", "data", "default dataset directory"},
        {"paths.cache_dir", "", "tile cache directory (empty disables caching)"},
        {"paths.output_dir", "", "log directory for commands without --out"},
        {"synthetic.clutter_min", "3", "fewest clutter shapes on a garbage patch"},
        {"synthetic.clutter_max", "8", "most clutter shapes on a garbage patch"},
        {"synthetic.noise_octaves", "4", "terrain noise octaves"},
        {"synthetic.bbox", "34.56,32.27,35.70,34.59", "minlat,minlon,maxlat,maxlon for synthetic coordinates"},
        {"augment.crop_fraction", "0.5", "side fraction kept by the centre crop"},
        {"augment.sharpen_kernel", "0,-1,0,-1,5,-1,0,-1,0", "3x3 sharpen kernel, row-major"},
        {"train.arch", "mini_resnet", "architecture name"},
        {"train.batch", "8", "mini-batch size"},
        {"train.lr", "0.01", "learning rate"},
        {"train.momentum", "0.9", "SGD momentum"},
        {"train.epochs", "30", "training epochs"},
        {"train.input_side", "64", "network input side in pixels"},
        {"eval.k", "5", "cross-validation folds"},
        {"eval.train_fraction", "0.7", "train share for the split protocol"},
        {"imagery.url_template", "", "slippy-map URL with {z}, {x}, {y}"},
        {"imagery.local_dir", "", "tile directory laid out as z/x/y.png"},
        {"imagery.tile_size", "256", "tile side in pixels"},
        {"imagery.cache_dir", "", "tile cache directory (overrides paths.cache_dir)"},
        {"imagery.max_concurrent", "4", "in-flight tile request cap"},
        {"imagery.timeout_s", "10", "per-request timeout in seconds"},
        {"map.patch_m", "20", "grid cell side in metres"},
        {"map.mpp", "0.10", "ground resolution in metres per pixel"},
    };
    return keys;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> key_names() {
    std::vector<std::string> names;
    for (const auto& k : config_keys()) names.emplace_back(k.name);
    return names;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

}  // namespace

std::string suggest(std::string_view word, const std::vector<std::string>& candidates) {
    std::string best;
    std::size_t best_distance = std::max<std::size_t>(2, word.size() / 3) + 1;
    for (const auto& c : candidates) {
        const auto d = edit_distance(word, c);
        if (d < best_distance) {
            best_distance = d;
            best = c;
        }
    }
    return best;
}

RunConfig::RunConfig() {
    for (const auto& k : config_keys()) values_.emplace(k.name, k.default_value);
}

void RunConfig::set(std::string_view key, std::string value) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        std::string msg = "unknown config key '" + std::string(key) + "'";
        const auto hint = suggest(key, key_names());
        if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
        throw UsageError(msg);
    }
    it->second = std::move(value);
}

const std::string& RunConfig::get(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error("config key '" + std::string(key) + "' is not defined");
    return it->second;
}

std::int64_t RunConfig::get_int(std::string_view key) const {
    const auto& text = get(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError("config key '" + std::string(key) + "' expects an integer, got '" + text + "'");
    }
    return v;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
    const auto& text = get(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError("config key '" + std::string(key) +
                         "' expects a non-negative integer, got '" + text + "'");
    }
    return v;
}

double RunConfig::get_double(std::string_view key) const {
    const auto& text = get(key);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw UsageError("config key '" + std::string(key) + "' expects a number, got '" + text + "'");
    }
    return v;
}

std::vector<double> RunConfig::get_doubles(std::string_view key) const {
    std::vector<double> out;
    std::stringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto t = trim(item);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != t.size()) {
            throw UsageError("config key '" + std::string(key) + "' has a non-numeric item '" + t + "'");
        }
        out.push_back(v);
    }
    return out;
}

RunConfig RunConfig::parse(std::string_view text, std::string_view origin) {
    RunConfig config;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const auto where = std::string(origin) + ":" + std::to_string(line_no);
        if (eq == std::string::npos) {
            throw UsageError(where + ": expected 'section.key = value'");
        }
        const auto key = trim(std::string_view(body).substr(0, eq));
        if (key.find('.') == std::string::npos) {
            throw UsageError(where + ": key '" + key + "' must look like section.key");
        }
        try {
            config.set(key, trim(std::string_view(body).substr(eq + 1)));
        } catch (const UsageError& e) {
            throw UsageError(where + ": " + e.what());
        }
    }
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                 path.string());
}

std::string RunConfig::dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::string>& flag,
                                                         const char* env_value) {
    if (flag && !flag->empty()) return std::filesystem::path(*flag);
    if (env_value != nullptr && *env_value != '\0') return std::filesystem::path(env_value);
    return std::nullopt;
}

SyntheticParams synthetic_params(const RunConfig& config) {
    SyntheticParams p;
    p.clutter_min = static_cast<int>(config.get_int("synthetic.clutter_min"));
    p.clutter_max = static_cast<int>(config.get_int("synthetic.clutter_max"));
    p.noise_octaves = static_cast<int>(config.get_int("synthetic.noise_octaves"));
    const auto box = config.get_doubles("synthetic.bbox");
    if (box.size() != 4) throw UsageError("synthetic.bbox needs 4 numbers: minlat,minlon,maxlat,maxlon");
    p.bbox = GeoBox{box[0], box[1], box[2], box[3]};
    return p;
}

AugmentOptions augment_options(const RunConfig& config) {
    AugmentOptions o;
    o.crop_fraction = config.get_double("augment.crop_fraction");
    const auto k = config.get_doubles("augment.sharpen_kernel");
    if (k.size() != 9) throw UsageError("augment.sharpen_kernel needs exactly 9 numbers");
    std::copy(k.begin(), k.end(), o.sharpen_kernel.begin());
    o.jobs = static_cast<int>(config.get_int("run.jobs"));
    return o;
}

TrainConfig train_config(const RunConfig& config) {
    TrainConfig c;
    c.mini_batch_size = static_cast<int>(config.get_int("train.batch"));
    c.learning_rate = config.get_double("train.lr");
    c.momentum = config.get_double("train.momentum");
    c.epochs = static_cast<int>(config.get_int("train.epochs"));
    c.input_side = static_cast<int>(config.get_int("train.input_side"));
    c.seed = config.get_u64("run.seed");
    c.validate();
    return c;
}

TileSourceConfig tile_source_config(const RunConfig& config) {
    TileSourceConfig c;
    c.url_template = config.get("imagery.url_template");
    c.local_dir = config.get("imagery.local_dir");
    if (!c.url_template.empty() && !c.local_dir.empty()) {
        throw UsageError("set either imagery.url_template or imagery.local_dir, not both");
    }
    if (c.url_template.empty() && c.local_dir.empty()) {
        throw UsageError("no imagery source: set imagery.local_dir or imagery.url_template");
    }
    c.kind = c.url_template.empty() ? TileSourceKind::local_dir : TileSourceKind::http_template;
    c.tile_size = static_cast<int>(config.get_int("imagery.tile_size"));
    c.max_concurrent = static_cast<int>(config.get_int("imagery.max_concurrent"));
    c.request_timeout_s = config.get_double("imagery.timeout_s");
    const auto& cache = config.get("imagery.cache_dir");
    c.cache_dir = cache.empty() ? std::filesystem::path(config.get("paths.cache_dir"))
                                : std::filesystem::path(cache);
    c.validate();
    return c;
}

}  // namespace tipscan
