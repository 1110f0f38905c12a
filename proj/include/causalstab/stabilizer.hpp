#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "causalstab/observer_io.hpp"
#include "causalstab/pipeline.hpp"
#include "causalstab/renderer.hpp"
#include "causalstab/smoother.hpp"

namespace causalstab
{

/// Every module configuration of one stabilisation run.
struct StabConfig
{
    ObserverConfig observer;
    PropagationConfig propagation;
    RansacConfig ransac;
    int grid_rows = 16;
    int grid_cols = 16;
    SmootherConfig smoother;
    RenderConfig render;
    QueueConfig queues;
    ExecMode mode = ExecMode::Pipeline;

    GridSpec grid(int width, int height) const { return {grid_rows, grid_cols, width, height}; }
    void validate() const;
};

/// Artificial per-stage delays in milliseconds, added after the real work.
struct StageDelays
{
    double est_ms = 0;
    double prop_ms = 0;
    double comp_ms = 0;
};

/// Externally computed observations replacing the builtin detector or dense flow.
struct MotionImports
{
    std::optional<ImportedKeypoints> keypoints;
    /// Flow file k carries the motion from frame k to frame k + 1.
    std::vector<std::filesystem::path> flow_files;
};

/// Detect on `cur`, estimate the flow from `prev`, and assemble m_t.
MotionSample observe_motion(const Frame& prev, const Frame& cur, const ObserverConfig& cfg,
                            const MotionImports* imports = nullptr);

struct MotionMessage
{
    std::shared_ptr<const Frame> frame;
    MotionSample sample;
};

struct GridMessage
{
    std::shared_ptr<const Frame> frame;
    MotionSample sample;
    GridMotionField motion;
};

/// Stage 1: keeps the previous frame.
class MotionEstimator
{
public:
    MotionEstimator(const ObserverConfig& cfg, std::shared_ptr<const MotionImports> imports = {});
    MotionMessage operator()(Frame frame);

private:
    ObserverConfig cfg_;
    std::shared_ptr<const MotionImports> imports_;
    std::shared_ptr<const Frame> prev_;
};

/// Stage 2: Δg_t from m_t; zero motion when the sample carries no usable point.
class MotionPropagator
{
public:
    MotionPropagator(const GridSpec& spec, const PropagationConfig& cfg, const RansacConfig& ransac);
    GridMessage operator()(MotionMessage msg);

private:
    GridSpec spec_;
    PropagationConfig cfg_;
    RansacConfig ransac_;
};

struct TrajectoryRecord
{
    int frame = 0;
    GridSpec spec;
    Pairsd raw;
    Pairsd smoothed;
    GridMotionField motion;
    BorderReport borders;
};

/// Stage 3: smooth, warp, crop.
class MotionCompensator
{
public:
    using Hook = std::function<void(const TrajectoryRecord&)>;

    MotionCompensator(const GridSpec& spec, const SmootherConfig& smoother, const RenderConfig& render, Hook hook = {});
    Frame operator()(GridMessage msg);

private:
    TrajectorySmoother smoother_;
    Compensator compensator_;
    Hook hook_;
};

struct StabilizeOptions
{
    StageDelays delays;
    std::shared_ptr<const MotionImports> imports;
    MotionCompensator::Hook hook;
};

/// Runs the three stages over `source`. Throws TooShort on an empty source.
PipelineReport stabilize(const FrameSource& source, const FrameSink& sink, const StabConfig& cfg,
                         const StabilizeOptions& opts = {});

/// Stage-free harness: each stage only sleeps for its delay on a 1x1 frame.
PipelineReport run_sleep_harness(int frames, const StageDelays& delays, const QueueConfig& queues, ExecMode mode);

}  // namespace causalstab
