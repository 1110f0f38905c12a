#include <gtest/gtest.h>

#include <json.hpp>
#include <thread>

#include "causalstab/stabilizer.hpp"
#include "test_util.hpp"

using namespace causalstab;

namespace
{

std::vector<Frame> jitter_sequence(int n, int w = 96, int h = 72, unsigned seed = 1)
{
    fixtures::Texture tex(seed);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Frame> frames;
    for (int i = 0; i < n; ++i)
        frames.push_back(tex.render(i, w, h, 0.4 * i + u(rng), u(rng)));
    return frames;
}

FrameSource vector_source(const std::vector<Frame>& frames)
{
    auto next = std::make_shared<std::size_t>(0);
    return [&frames, next]() -> std::optional<Frame> {
        if (*next >= frames.size())
            return std::nullopt;
        return frames[(*next)++];
    };
}

StabConfig small_config(ExecMode mode)
{
    StabConfig cfg;
    cfg.mode = mode;
    cfg.grid_rows = cfg.grid_cols = 6;
    cfg.observer.grid_gx = cfg.observer.grid_gy = 8;
    return cfg;
}

std::vector<Frame> run(const std::vector<Frame>& frames, const StabConfig& cfg, PipelineReport* report = nullptr)
{
    std::vector<Frame> out;
    auto r = stabilize(vector_source(frames), [&](Frame f) { out.push_back(std::move(f)); }, cfg);
    if (report)
        *report = r;
    return out;
}

}  // namespace

TEST(BoundedQueue, FifoFinishAndAbort)
{
    BoundedQueue<int> q(2);
    EXPECT_TRUE(q.push(1));
    EXPECT_TRUE(q.push(2));
    std::atomic<bool> pushed{false};
    std::thread producer([&] {
        q.push(3);
        pushed = true;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    EXPECT_FALSE(pushed.load());
    EXPECT_EQ(*q.pop(), 1);
    producer.join();
    EXPECT_TRUE(pushed.load());
    q.finish();
    EXPECT_EQ(*q.pop(), 2);
    EXPECT_EQ(*q.pop(), 3);
    EXPECT_FALSE(q.pop().has_value());

    BoundedQueue<int> p(1);
    std::thread consumer([&] { EXPECT_FALSE(p.pop().has_value()); });
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    p.abort();
    consumer.join();
    EXPECT_FALSE(p.push(4));
}

TEST(PredictPerformance, Examples)
{
    const QueueConfig q{8, 8};
    auto p = predict_performance({0.01, 0.01, 0.01}, q, 0, 0);
    EXPECT_NEAR(p.fps_max, 100.0, 1e-9);
    EXPECT_NEAR(p.speedup, 3.0, 1e-12);
    p = predict_performance({0.03, 0.01, 0.01}, q, 0, 0);
    EXPECT_NEAR(p.fps_max, 100.0 / 3.0, 1e-9);
    EXPECT_NEAR(p.speedup, 5.0 / 3.0, 1e-12);
    p = predict_performance({0.01, 0.01, 0.01}, q, motion_message_bytes(512), grid_message_bytes(16 * 16));
    EXPECT_EQ(p.mem_overhead_bytes, 81920.0);
    EXPECT_THROW(predict_performance({0, 0.01, 0.01}, q, 0, 0), Error);
}

TEST(SleepHarness, ThroughputFollowsSlowestStage)
{
    const auto r = run_sleep_harness(60, {10, 10, 10}, QueueConfig{}, ExecMode::Pipeline);
    EXPECT_EQ(r.frames, 60);
    EXPECT_NEAR(r.measured_fps, 100.0, 15.0);
    EXPECT_LE(r.max_in_flight, 8 + 8 + 3);
    const auto s = run_sleep_harness(20, {10, 10, 10}, QueueConfig{}, ExecMode::Sequential);
    EXPECT_NEAR(s.measured_fps, 100.0 / 3.0, 5.0);
    EXPECT_EQ(s.max_in_flight, 1);
}

TEST(Stabilize, PipelineMatchesSequentialWithUnitQueues)
{
    const auto frames = jitter_sequence(14);
    auto seq_cfg = small_config(ExecMode::Sequential);
    auto pipe_cfg = small_config(ExecMode::Pipeline);
    pipe_cfg.queues = {1, 1};
    PipelineReport report;
    const auto a = run(frames, seq_cfg);
    const auto b = run(frames, pipe_cfg, &report);
    ASSERT_EQ(a.size(), frames.size());
    ASSERT_EQ(b.size(), frames.size());
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        EXPECT_EQ(b[i].index, int(i));
        EXPECT_EQ(a[i].data, b[i].data) << "frame " << i;
    }
    EXPECT_EQ(report.frames, 14);
    EXPECT_LE(report.max_in_flight, 1 + 1 + 3);
}

TEST(Stabilize, SlowSinkBoundsInFlightFrames)
{
    const auto frames = jitter_sequence(20, 48, 40);
    auto cfg = small_config(ExecMode::Pipeline);
    cfg.queues = {2, 1};
    const auto r = stabilize(
        vector_source(frames), [](Frame) { std::this_thread::sleep_for(std::chrono::milliseconds(15)); }, cfg);
    EXPECT_EQ(r.frames, 20);
    EXPECT_LE(r.max_in_flight, 2 + 1 + 3);
}

TEST(Stabilize, ErrorsPropagate)
{
    const auto frames = jitter_sequence(8, 48, 40);
    for (auto mode : {ExecMode::Pipeline, ExecMode::Sequential})
    {
        int n = 0;
        FrameSource bad = [&]() -> std::optional<Frame> {
            if (n == 5)
                throw Error(Errc::SourceError, "broken source");
            return frames[std::size_t(n++)];
        };
        std::vector<Frame> out;
        try
        {
            stabilize(bad, [&](Frame f) { out.push_back(std::move(f)); }, small_config(mode));
            ADD_FAILURE() << "no exception";
        }
        catch (const Error& e)
        {
            EXPECT_EQ(e.code(), Errc::SourceError);
        }
        for (std::size_t i = 0; i < out.size(); ++i)
            EXPECT_EQ(out[i].index, int(i));

        try
        {
            stabilize(vector_source(frames), [](Frame) { throw Error(Errc::SinkError, "disk full"); },
                      small_config(mode));
            ADD_FAILURE() << "no exception";
        }
        catch (const Error& e)
        {
            EXPECT_EQ(e.code(), Errc::SinkError);
        }
    }
    EXPECT_THROW(run({}, small_config(ExecMode::Pipeline)), Error);
}

TEST(Stabilize, StaticSceneIsUnchanged)
{
    std::vector<Frame> frames;
    for (int i = 0; i < 6; ++i)
        frames.push_back(fixtures::Texture(9).render(i, 64, 48));
    const auto out = run(frames, small_config(ExecMode::Sequential));
    for (std::size_t i = 0; i < out.size(); ++i)
        EXPECT_EQ(out[i].data, frames[i].data);
}

TEST(Stabilize, HookSeesEveryFrameInOrder)
{
    const auto frames = jitter_sequence(6, 64, 48);
    std::vector<int> seen;
    StabilizeOptions opts;
    opts.hook = [&](const TrajectoryRecord& r) {
        seen.push_back(r.frame);
        EXPECT_EQ(r.raw.rows(), r.spec.size());
    };
    stabilize(vector_source(frames), [](Frame) {}, small_config(ExecMode::Pipeline), opts);
    EXPECT_EQ(seen, (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(Report, JsonKeys)
{
    PipelineReport r;
    r.frames = 3;
    const auto j = nlohmann::json::parse(report_to_json(r));
    for (const char* key : {"frames", "wall_time_s", "measured_fps", "predicted_fps", "speedup_predicted",
                            "speedup_measured", "latency_p50_ms", "latency_p95_ms", "stage_occupancy"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(parse_exec_mode("sequential"), ExecMode::Sequential);
    EXPECT_THROW(parse_exec_mode("fast"), Error);
}
