#include "causalstab/pipeline.hpp"

#include <cmath>

#include <json.hpp>

namespace causalstab
{

void QueueConfig::validate() const
{
    if (capacity_me_mp < 1)
        throw Error(Errc::ConfigError, "queues.capacity_me_mp: must be >= 1");
    if (capacity_mp_mc < 1)
        throw Error(Errc::ConfigError, "queues.capacity_mp_mc: must be >= 1");
}

std::string exec_mode_name(ExecMode m)
{
    return m == ExecMode::Pipeline ? "pipeline" : "sequential";
}

ExecMode parse_exec_mode(const std::string& name)
{
    if (name == "pipeline")
        return ExecMode::Pipeline;
    if (name == "sequential")
        return ExecMode::Sequential;
    throw Error(Errc::ConfigError, "mode: expected pipeline or sequential, got '" + name + "'");
}

PerformancePrediction predict_performance(const StageTimings& t, const QueueConfig& q, std::size_t motion_bytes,
                                          std::size_t grid_bytes)
{
    if (!(t.t_est > 0 && t.t_prop > 0 && t.t_smooth > 0))
        throw Error(Errc::InvalidArgument, "stage timings must be positive");
    PerformancePrediction p;
    p.fps_max = 1.0 / t.slowest();
    p.speedup = t.serial() / t.slowest();
    p.mem_overhead_bytes = double(q.capacity_me_mp) * double(motion_bytes) + double(q.capacity_mp_mc) * double(grid_bytes);
    return p;
}

namespace detail
{

namespace
{

double percentile(std::vector<double>& v, double q)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - double(lo));
}

}  // namespace

PipelineReport summarize(ExecMode mode, int frames, double wall, const std::array<double, 3>& busy,
                         std::vector<double> latencies, int max_in_flight)
{
    PipelineReport r;
    r.mode = mode;
    r.frames = frames;
    r.wall_time = wall;
    r.measured_fps = wall > 0 ? frames / wall : 0.0;
    r.max_in_flight = max_in_flight;
    if (frames > 0)
    {
        r.timings = {busy[0] / frames, busy[1] / frames, busy[2] / frames};
        for (int i = 0; i < 3; ++i)
            r.occupancy[std::size_t(i)] = wall > 0 ? busy[std::size_t(i)] / wall : 0.0;
    }
    if (r.timings.slowest() > 0)
    {
        r.predicted_fps = 1.0 / r.timings.slowest();
        r.speedup_predicted = r.timings.serial() / r.timings.slowest();
    }
    r.latency_p50 = percentile(latencies, 0.5);
    r.latency_p95 = percentile(latencies, 0.95);
    return r;
}

}  // namespace detail

std::string report_to_json(const PipelineReport& r, int indent)
{
    nlohmann::ordered_json j;
    j["mode"] = exec_mode_name(r.mode);
    j["frames"] = r.frames;
    j["wall_time_s"] = r.wall_time;
    j["measured_fps"] = r.measured_fps;
    j["predicted_fps"] = r.predicted_fps;
    j["speedup_predicted"] = r.speedup_predicted;
    j["speedup_measured"] = r.speedup_measured;
    j["latency_p50_ms"] = 1e3 * r.latency_p50;
    j["latency_p95_ms"] = 1e3 * r.latency_p95;
    j["stage_occupancy"] = {{"estimation", r.occupancy[0]}, {"propagation", r.occupancy[1]},
                            {"compensation", r.occupancy[2]}};
    j["stage_ms"] = {{"estimation", 1e3 * r.timings.t_est}, {"propagation", 1e3 * r.timings.t_prop},
                     {"compensation", 1e3 * r.timings.t_smooth}};
    j["max_in_flight"] = r.max_in_flight;
    j["mem_overhead_bytes"] = r.mem_overhead_bytes;
    return j.dump(indent);
}

}  // namespace causalstab
