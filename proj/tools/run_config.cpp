#include "run_config.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <set>
#include <type_traits>
#include <utility>

namespace causalstab::cli
{

namespace
{

using nlohmann::json;
using nlohmann::ordered_json;

template <typename E>
struct EnumNames;

template <>
struct EnumNames<FlowMode>
{
    static constexpr std::array<std::pair<FlowMode, const char*>, 2> table{
        {{FlowMode::Dense, "dense"}, {FlowMode::Sparse, "sparse"}}};
};

template <>
struct EnumNames<StructureForm>
{
    static constexpr std::array<std::pair<StructureForm, const char*>, 2> table{
        {{StructureForm::Orthogonality, "orthogonality"}, {StructureForm::Literal, "literal"}}};
};

template <>
struct EnumNames<KernelScope>
{
    static constexpr std::array<std::pair<KernelScope, const char*>, 2> table{
        {{KernelScope::Global, "global"}, {KernelScope::PerVertex, "per-vertex"}}};
};

template <>
struct EnumNames<ExecMode>
{
    static constexpr std::array<std::pair<ExecMode, const char*>, 2> table{
        {{ExecMode::Pipeline, "pipeline"}, {ExecMode::Sequential, "sequential"}}};
};

template <>
struct EnumNames<BorderPolicy>
{
    static constexpr std::array<std::pair<BorderPolicy, const char*>, 2> table{
        {{BorderPolicy::CropZoom, "crop-zoom"}, {BorderPolicy::None, "no-crop"}}};
};

template <>
struct EnumNames<StabilityBand>
{
    static constexpr std::array<std::pair<StabilityBand, const char*>, 2> table{
        {{StabilityBand::FirstFive, "1-5"}, {StabilityBand::TwoToSix, "2-6"}}};
};

template <>
struct EnumNames<LossProfile>
{
    static constexpr std::array<std::pair<LossProfile, const char*>, 2> table{
        {{LossProfile::Core, "core"}, {LossProfile::Appendix, "appendix"}}};
};

// Keys whose object value is a free-form map rather than a fixed schema.
const std::set<std::string> kOpenKeys = {"observer.detector_weights"};

json::json_pointer pointer(const std::string& key)
{
    std::string p = "/" + key;
    for (char& ch : p)
        if (ch == '.')
            ch = '/';
    return json::json_pointer(p);
}

[[noreturn]] void bad(const std::string& key, const std::string& what)
{
    throw Error(Errc::ConfigError, key + ": " + what);
}

template <typename V>
void visit(RunConfig& c, V&& v)
{
    ObserverConfig& o = c.stab.observer;
    v("observer.detectors", o.detectors);
    v("observer.detector_weights", o.detector_weights);
    v("observer.nms_radius", o.nms_radius);
    v("observer.grid_gx", o.grid_gx);
    v("observer.grid_gy", o.grid_gy);
    v("observer.per_cell_k", o.per_cell_k);
    v("observer.min_separation", o.min_separation);
    v("observer.mask_radius", o.mask_radius);
    v("observer.pyramid_levels", o.pyramid_levels);
    v("observer.lk_window", o.lk_window);
    v("observer.lk_iterations", o.lk_iterations);
    v("observer.dense_stride", o.dense_stride);
    v("observer.max_candidates", o.max_candidates);
    v("observer.quality_level", o.quality_level);
    v("observer.min_response", o.min_response);
    v("observer.fast_threshold", o.fast_threshold);
    v("observer.flow_mode", o.flow_mode);

    PropagationConfig& p = c.stab.propagation;
    v("propagation.k_homo", p.k_homo);
    v("propagation.kmeans_iters", p.kmeans_iters);
    v("propagation.motion_weight", p.motion_weight);
    v("propagation.fusion_temperature", p.fusion_temperature);
    v("propagation.residual_iters", p.residual_iters);
    v("propagation.residual_step", p.residual_step);
    v("propagation.lambda_kp", p.lambda_kp);
    v("propagation.lambda_proj", p.lambda_proj);
    v("propagation.lambda_struct", p.lambda_struct);
    v("propagation.charbonnier_eps", p.charbonnier_eps);
    v("propagation.structure_form", p.structure_form);

    RansacConfig& r = c.stab.ransac;
    v("ransac.max_iters", r.max_iters);
    v("ransac.inlier_threshold", r.inlier_threshold);
    v("ransac.min_inlier_fraction", r.min_inlier_fraction);
    v("ransac.confidence", r.confidence);

    v("grid.rows", c.stab.grid_rows);
    v("grid.cols", c.stab.grid_cols);

    SmootherConfig& s = c.stab.smoother;
    v("smoother.profile", c.smoother_profile);
    v("smoother.window", s.window);
    v("smoother.lambda_blend", s.lambda_blend);
    v("smoother.tau_time", s.tau_time);
    v("smoother.beta", s.beta);
    v("smoother.optimize_beta", s.optimize_beta);
    v("smoother.gamma0", s.gamma0);
    v("smoother.lambda_time", s.lambda_time);
    v("smoother.lambda_freq", s.lambda_freq);
    v("smoother.lambda_spatial", s.lambda_spatial);
    v("smoother.lambda_proj", s.lambda_proj);
    v("smoother.lambda_edge", s.lambda_edge);
    v("smoother.lambda_angle", s.lambda_angle);
    v("smoother.charbonnier_eps", s.charbonnier_eps);
    v("smoother.tap_bound", s.tap_bound);
    v("smoother.kernel_iters", s.kernel_iters);
    v("smoother.kernel_step", s.kernel_step);
    v("smoother.kernel_restarts", s.kernel_restarts);
    v("smoother.detrend", s.detrend);
    v("smoother.scope", s.scope);

    v("render.border_policy", c.stab.render.policy);
    v("render.border_window", c.stab.render.border_window);

    v("queues.capacity_me_mp", c.stab.queues.capacity_me_mp);
    v("queues.capacity_mp_mc", c.stab.queues.capacity_mp_mc);

    v("metrics.min_matches", c.metrics_min_matches);
    v("metrics.band", c.metrics_band);

    v("io.input", c.io.input);
    v("io.output", c.io.output);
    v("io.raw_width", c.io.raw_width);
    v("io.raw_height", c.io.raw_height);
    v("io.dump_trajectories", c.io.dump_trajectories);
    v("io.flow_dir", c.io.flow_dir);
    v("io.keypoints", c.io.keypoints);

    v("mode", c.stab.mode);
    v("seed", c.seed);
}

struct Writer
{
    ordered_json& out;

    template <typename T>
    void operator()(const std::string& key, const T& value)
    {
        ordered_json* node = &out;
        std::size_t start = 0;
        for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1)
            node = &(*node)[key.substr(start, dot - start)];
        ordered_json& leaf = (*node)[key.substr(start)];
        if constexpr (std::is_enum_v<T>)
        {
            for (const auto& [e, name] : EnumNames<T>::table)
                if (e == value)
                    leaf = name;
        }
        else if constexpr (std::is_same_v<T, std::map<std::string, double>>)
        {
            leaf = ordered_json::object();
            for (const auto& [k, w] : value)
                leaf[k] = w;
        }
        else
        {
            leaf = value;
        }
    }
};

struct Reader
{
    const json& user;

    template <typename T>
    void operator()(const std::string& key, T& value)
    {
        const auto ptr = pointer(key);
        if (!user.contains(ptr))
            return;
        read(key, user.at(ptr), value);
    }

    static void read(const std::string& key, const json& j, int& value)
    {
        long long v = 0;
        if (j.is_number_integer())
            v = j.get<long long>();
        else if (j.is_number_float() && std::floor(j.get<double>()) == j.get<double>())
            v = static_cast<long long>(j.get<double>());
        else
            bad(key, "expected an integer");
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
            bad(key, "integer out of range");
        value = int(v);
    }

    static void read(const std::string& key, const json& j, std::uint64_t& value)
    {
        if (j.is_number_unsigned())
            value = j.get<std::uint64_t>();
        else if (j.is_number_integer() && j.get<long long>() >= 0)
            value = std::uint64_t(j.get<long long>());
        else
            bad(key, "expected a non-negative integer");
    }

    static void read(const std::string& key, const json& j, double& value)
    {
        if (!j.is_number())
            bad(key, "expected a number");
        value = j.get<double>();
    }

    static void read(const std::string& key, const json& j, bool& value)
    {
        if (!j.is_boolean())
            bad(key, "expected true or false");
        value = j.get<bool>();
    }

    static void read(const std::string& key, const json& j, std::string& value)
    {
        if (!j.is_string())
            bad(key, "expected a string");
        value = j.get<std::string>();
    }

    static void read(const std::string& key, const json& j, std::vector<std::string>& value)
    {
        if (!j.is_array())
            bad(key, "expected an array of strings");
        value.clear();
        for (const auto& item : j)
        {
            if (!item.is_string())
                bad(key, "expected an array of strings");
            value.push_back(item.get<std::string>());
        }
    }

    static void read(const std::string& key, const json& j, std::map<std::string, double>& value)
    {
        if (!j.is_object())
            bad(key, "expected an object of numbers");
        value.clear();
        for (const auto& [k, w] : j.items())
        {
            if (!w.is_number())
                bad(key + "." + k, "expected a number");
            value[k] = w.get<double>();
        }
    }

    template <typename E>
        requires std::is_enum_v<E>
    static void read(const std::string& key, const json& j, E& value)
    {
        std::string options;
        if (j.is_string())
            for (const auto& [e, name] : EnumNames<E>::table)
                if (j.get<std::string>() == name)
                {
                    value = e;
                    return;
                }
        for (const auto& [e, name] : EnumNames<E>::table)
            options += (options.empty() ? "" : ", ") + std::string(name);
        bad(key, "expected one of " + options);
    }
};

void check_keys(const json& user, const ordered_json& known, const std::string& prefix)
{
    if (!user.is_object())
        bad(prefix.empty() ? "config" : prefix, "expected an object");
    for (const auto& [k, v] : user.items())
    {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        const auto it = known.find(k);
        if (it == known.end())
            throw Error(Errc::ConfigError, "unknown configuration key '" + key + "'");
        if (it->is_object() && !kOpenKeys.count(key))
            check_keys(v, *it, key);
    }
}

}  // namespace

RunConfig RunConfig::defaults(LossProfile profile)
{
    RunConfig c;
    c.smoother_profile = profile;
    c.stab.smoother = SmootherConfig::profile(profile);
    return c;
}

StabConfig RunConfig::effective_stab() const
{
    StabConfig s = stab;
    s.propagation.seed = seed;
    s.ransac.seed = seed;
    return s;
}

MetricsConfig RunConfig::metrics() const
{
    MetricsConfig m;
    m.observer = stab.observer;
    m.ransac = stab.ransac;
    m.ransac.seed = seed;
    m.min_matches = metrics_min_matches;
    m.band = metrics_band;
    return m;
}

void RunConfig::validate() const
{
    stab.validate();
    metrics().validate();
    if (io.raw_width < 0)
        bad("io.raw_width", "must be >= 0");
    if (io.raw_height < 0)
        bad("io.raw_height", "must be >= 0");
}

ordered_json to_json(const RunConfig& cfg)
{
    ordered_json out = ordered_json::object();
    RunConfig copy = cfg;
    visit(copy, Writer{out});
    return out;
}

RunConfig from_json(const json& user)
{
    LossProfile profile = LossProfile::Appendix;
    const auto profile_ptr = pointer("smoother.profile");
    if (user.is_object() && user.contains(profile_ptr))
        Reader::read("smoother.profile", user.at(profile_ptr), profile);
    RunConfig cfg = RunConfig::defaults(profile);
    check_keys(user, to_json(cfg), "");
    visit(cfg, Reader{user});
    cfg.validate();
    return cfg;
}

void apply_assignment(json& user, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw Error(Errc::ConfigError, "--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    try
    {
        user[pointer(key)] = std::move(value);
    }
    catch (const json::exception&)
    {
        bad(key, "cannot assign below a non-object value");
    }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& assignments,
                          const json& overrides)
{
    json user = json::object();
    if (file)
    {
        std::ifstream in(*file);
        if (!in)
            throw Error(Errc::IoError, "cannot open config file " + file->string());
        user = json::parse(in, nullptr, false);
        if (user.is_discarded())
            throw Error(Errc::ConfigError, "config: " + file->string() + " is not valid JSON");
    }
    for (const auto& a : assignments)
        apply_assignment(user, a);
    user.merge_patch(overrides);
    return from_json(user);
}

}  // namespace causalstab::cli
