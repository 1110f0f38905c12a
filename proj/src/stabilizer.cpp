#include "causalstab/stabilizer.hpp"

#include <chrono>
#include <thread>

namespace causalstab
{

void StabConfig::validate() const
{
    observer.validate();
    propagation.validate();
    ransac.validate();
    if (grid_rows < 2 || grid_cols < 2)
        throw Error(Errc::ConfigError, "grid.rows/grid.cols: must be >= 2");
    smoother.validate();
    render.validate();
    queues.validate();
}

MotionSample observe_motion(const Frame& prev, const Frame& cur, const ObserverConfig& cfg,
                            const MotionImports* imports)
{
    if (prev.width != cur.width || prev.height != cur.height)
        throw Error(Errc::DimensionMismatch, "consecutive frames differ in size");

    std::vector<KeypointSet> sets;
    if (imports && imports->keypoints)
    {
        if (auto it = imports->keypoints->find(cur.index); it != imports->keypoints->end())
            sets = it->second;
    }
    else
    {
        for (const auto& name : cfg.detectors)
            sets.push_back(detect_keypoints(cur, parse_detector(name), cfg));
    }
    for (auto& s : sets)
    {
        s.frame_index = cur.index;
        s.width = cur.width;
        s.height = cur.height;
    }
    KeypointSet candidates = sets.empty() ? KeypointSet{cur.index, cur.width, cur.height, {}} : fuse_detections(sets, cfg);
    const KeypointSet kept = homogenize(candidates, cfg);

    const bool imported_flow = imports && cur.index >= 1 && std::size_t(cur.index - 1) < imports->flow_files.size();
    MotionSample m;
    if (imported_flow || cfg.flow_mode == FlowMode::Dense)
    {
        FlowField dense = imported_flow ? read_flo(imports->flow_files[std::size_t(cur.index - 1)])
                                        : estimate_dense_flow(prev, cur, cfg);
        if (dense.cols != cur.width || dense.rows != cur.height)
            throw Error(Errc::DimensionMismatch, "imported flow does not match the frame size");
        const GuidanceMask mask = build_guidance_mask(candidates, cfg.mask_radius, cur.width, cur.height);
        m = sample_motion(fuse_flow(dense, candidates, mask), kept);
    }
    else
    {
        m = estimate_sparse_flow(prev, cur, kept, cfg);
    }
    m.frame_index = cur.index;
    m.width = cur.width;
    m.height = cur.height;
    return m;
}

MotionEstimator::MotionEstimator(const ObserverConfig& cfg, std::shared_ptr<const MotionImports> imports)
    : cfg_(cfg), imports_(std::move(imports))
{
}

MotionMessage MotionEstimator::operator()(Frame frame)
{
    frame.validate();
    auto cur = std::make_shared<const Frame>(std::move(frame));
    MotionMessage msg{cur, {}};
    if (prev_)
    {
        msg.sample = observe_motion(*prev_, *cur, cfg_, imports_.get());
    }
    else
    {
        msg.sample.frame_index = cur->index;
        msg.sample.width = cur->width;
        msg.sample.height = cur->height;
    }
    prev_ = cur;
    return msg;
}

MotionPropagator::MotionPropagator(const GridSpec& spec, const PropagationConfig& cfg, const RansacConfig& ransac)
    : spec_(spec), cfg_(cfg), ransac_(ransac)
{
}

GridMessage MotionPropagator::operator()(MotionMessage msg)
{
    const int index = msg.frame->index;
    GridMotionField dg(spec_, index);
    const bool usable = (msg.sample.confidences.array() > 0).any();
    if (usable)
    {
        dg = propagate(msg.sample, spec_, cfg_, ransac_);
        dg.frame_index = index;
    }
    return {std::move(msg.frame), std::move(msg.sample), std::move(dg)};
}

MotionCompensator::MotionCompensator(const GridSpec& spec, const SmootherConfig& smoother, const RenderConfig& render,
                                     Hook hook)
    : smoother_(spec, smoother), compensator_(spec, render), hook_(std::move(hook))
{
}

Frame MotionCompensator::operator()(GridMessage msg)
{
    const SmoothedFrame s = smoother_.step(msg.motion, msg.sample);
    Frame out = compensator_.render(*msg.frame, s.smoothed, s.raw);
    if (hook_)
        hook_({msg.frame->index, msg.motion.spec, s.raw, s.smoothed, msg.motion, compensator_.last_report()});
    return out;
}

namespace
{

void pause(double ms)
{
    if (ms > 0)
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

PipelineReport stabilize(const FrameSource& source, const FrameSink& sink, const StabConfig& cfg,
                         const StabilizeOptions& opts)
{
    cfg.validate();
    std::optional<Frame> first = source();
    if (!first)
        throw Error(Errc::TooShort, "input sequence is empty");
    first->validate();
    const GridSpec spec = cfg.grid(first->width, first->height);

    auto pending = std::make_shared<std::optional<Frame>>(std::move(first));
    FrameSource chained = [pending, &source]() -> std::optional<Frame> {
        if (*pending)
        {
            std::optional<Frame> f = std::move(*pending);
            pending->reset();
            return f;
        }
        return source();
    };

    auto est = std::make_shared<MotionEstimator>(cfg.observer, opts.imports);
    auto prop = std::make_shared<MotionPropagator>(spec, cfg.propagation, cfg.ransac);
    auto comp = std::make_shared<MotionCompensator>(spec, cfg.smoother, cfg.render, opts.hook);
    const StageDelays d = opts.delays;

    std::function<MotionMessage(Frame)> f1 = [est, d](Frame f) {
        auto m = (*est)(std::move(f));
        pause(d.est_ms);
        return m;
    };
    std::function<GridMessage(MotionMessage)> f2 = [prop, d](MotionMessage m) {
        auto g = (*prop)(std::move(m));
        pause(d.prop_ms);
        return g;
    };
    std::function<Frame(GridMessage)> f3 = [comp, d](GridMessage g) {
        auto f = (*comp)(std::move(g));
        pause(d.comp_ms);
        return f;
    };
    PipelineReport r = run_stages(chained, f1, f2, f3, sink, cfg.queues, cfg.mode);
    r.mem_overhead_bytes = double(cfg.queues.capacity_me_mp) * double(motion_message_bytes(std::size_t(cfg.observer.keypoint_cap()))) +
                           double(cfg.queues.capacity_mp_mc) * double(grid_message_bytes(std::size_t(spec.size())));
    return r;
}

PipelineReport run_sleep_harness(int frames, const StageDelays& delays, const QueueConfig& queues, ExecMode mode)
{
    int produced = 0;
    FrameSource source = [&]() -> std::optional<Frame> {
        if (produced >= frames)
            return std::nullopt;
        return Frame(produced++, 1, 1, 1);
    };
    std::function<Frame(Frame)> f1 = [&](Frame f) {
        pause(delays.est_ms);
        return f;
    };
    std::function<Frame(Frame)> f2 = [&](Frame f) {
        pause(delays.prop_ms);
        return f;
    };
    std::function<Frame(Frame)> f3 = [&](Frame f) {
        pause(delays.comp_ms);
        return f;
    };
    return run_stages<Frame, Frame>(source, f1, f2, f3, [](Frame) {}, queues, mode);
}

}  // namespace causalstab
