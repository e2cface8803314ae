#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tipscan/augment.hpp"
#include "tipscan/synthetic.hpp"
#include "tipscan/tiles.hpp"
#include "tipscan/training.hpp"

namespace tipscan {

struct ConfigKey {
    std::string_view name;
    std::string_view default_value;
    std::string_view help;
};

/// Every key the tool understands, with its default.
const std::vector<ConfigKey>& config_keys();

/// Resolved run configuration. Grammar, one entry per line:
///
///     # comment
///     section.key = value
///
/// Blank lines are ignored; a value runs to the end of the line (an inline
/// `#` starts a comment). Unknown keys are rejected.
class RunConfig {
public:
    RunConfig();

    static RunConfig parse(std::string_view text, std::string_view origin = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    /// Throws UsageError for unknown keys, suggesting the closest known one.
    void set(std::string_view key, std::string value);
    const std::string& get(std::string_view key) const;

    std::int64_t get_int(std::string_view key) const;
    std::uint64_t get_u64(std::string_view key) const;
    double get_double(std::string_view key) const;
    std::vector<double> get_doubles(std::string_view key) const;

    const std::map<std::string, std::string, std::less<>>& values() const noexcept {
        return values_;
    }
    /// `key = value` lines in key order; parses back to the same config.
    std::string dump() const;

private:
    std::map<std::string, std::string, std::less<>> values_;
};

/// `--config` wins; otherwise the TIPSCAN_CONFIG value when non-empty.
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::string>& flag,
                                                         const char* env_value);

/// Closest candidate by edit distance, or empty when nothing is close.
std::string suggest(std::string_view word, const std::vector<std::string>& candidates);

SyntheticParams synthetic_params(const RunConfig& config);
AugmentOptions augment_options(const RunConfig& config);
TrainConfig train_config(const RunConfig& config);
TileSourceConfig tile_source_config(const RunConfig& config);

}  // namespace tipscan
