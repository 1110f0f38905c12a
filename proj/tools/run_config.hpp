#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalstab/metrics.hpp"
#include "causalstab/stabilizer.hpp"

namespace causalstab::cli
{

struct IoConfig
{
    std::string input;
    std::string output;
    /// Frame size of headerless gray8 streams.
    int raw_width = 0;
    int raw_height = 0;
    std::string dump_trajectories;
    std::string flow_dir;
    std::string keypoints;
};

struct RunConfig
{
    /// Base of the smoother defaults; explicit smoother keys override it.
    LossProfile smoother_profile = LossProfile::Appendix;
    StabConfig stab;
    int metrics_min_matches = 8;
    StabilityBand metrics_band = StabilityBand::FirstFive;
    IoConfig io;
    /// Drives every seeded component (clustering, RANSAC).
    std::uint64_t seed = 0;

    static RunConfig defaults(LossProfile profile = LossProfile::Appendix);

    /// Stabiliser settings with the seed applied.
    StabConfig effective_stab() const;
    MetricsConfig metrics() const;
    void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Strict load on top of the defaults: unknown keys and wrong value types throw ConfigError naming the key.
RunConfig from_json(const nlohmann::json& user);

/// Applies `key=value` at a dotted path. The value is read as JSON when it parses, else as a string.
void apply_assignment(nlohmann::json& user, const std::string& assignment);

/// Config file (optional), then the assignments in order, then `overrides` as a JSON merge patch.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& assignments,
                          const nlohmann::json& overrides = nlohmann::json::object());

}  // namespace causalstab::cli
