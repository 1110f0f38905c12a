#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "causalstab/image.hpp"

namespace causalstab
{

/// Blocking single-producer/single-consumer FIFO with a fixed number of slots.
template <typename T>
class BoundedQueue
{
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

    /// Blocks while full. Returns false once the queue is closed.
    bool push(T item)
    {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_)
            return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks while empty. Returns nullopt when closed and drained, or when aborted.
    std::optional<T> pop()
    {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return aborted_ || finished_ || closed_ || !items_.empty(); });
        if (aborted_ || items_.empty())
            return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    /// End of stream: queued items stay poppable, further pushes are rejected.
    void finish()
    {
        std::lock_guard lock(mutex_);
        finished_ = true;
        not_empty_.notify_all();
    }

    /// Poison: wakes and stops both sides immediately.
    void abort()
    {
        std::lock_guard lock(mutex_);
        closed_ = aborted_ = true;
        items_.clear();
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t size() const
    {
        std::lock_guard lock(mutex_);
        return items_.size();
    }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    bool finished_ = false;
    bool closed_ = false;
    bool aborted_ = false;
};

struct QueueConfig
{
    int capacity_me_mp = 8;
    int capacity_mp_mc = 8;

    void validate() const;
};

enum class ExecMode
{
    Pipeline,
    Sequential,
};

std::string exec_mode_name(ExecMode m);
ExecMode parse_exec_mode(const std::string& name);

/// Mean seconds per frame for each stage.
struct StageTimings
{
    double t_est = 0;
    double t_prop = 0;
    double t_smooth = 0;

    double serial() const { return t_est + t_prop + t_smooth; }
    double slowest() const { return std::max({t_est, t_prop, t_smooth}); }
};

struct PerformancePrediction
{
    double fps_max = 0;
    double speedup = 0;
    double mem_overhead_bytes = 0;
};

/// Bytes of one motion message: (x, y, u, v) as float per keypoint.
inline std::size_t motion_message_bytes(std::size_t keypoints) { return 16 * keypoints; }
/// Bytes of one grid message: (dx, dy) as float per vertex.
inline std::size_t grid_message_bytes(std::size_t vertices) { return 8 * vertices; }

PerformancePrediction predict_performance(const StageTimings& t, const QueueConfig& q, std::size_t motion_bytes,
                                          std::size_t grid_bytes);

struct PipelineReport
{
    ExecMode mode = ExecMode::Pipeline;
    int frames = 0;
    double wall_time = 0;
    double measured_fps = 0;
    double predicted_fps = 0;
    double speedup_predicted = 0;
    /// Sequential wall time over this run's wall time; 0 when no reference run exists.
    double speedup_measured = 0;
    StageTimings timings;
    std::array<double, 3> occupancy{};
    double latency_p50 = 0;
    double latency_p95 = 0;
    int max_in_flight = 0;
    double mem_overhead_bytes = 0;
};

std::string report_to_json(const PipelineReport& r, int indent = 2);

using FrameSource = std::function<std::optional<Frame>()>;
using FrameSink = std::function<void(Frame)>;

namespace detail
{

using clock = std::chrono::steady_clock;

inline double seconds(clock::time_point a, clock::time_point b)
{
    return std::chrono::duration<double>(b - a).count();
}

template <typename T>
struct Stamped
{
    T value;
    clock::time_point entered;
};

PipelineReport summarize(ExecMode mode, int frames, double wall, const std::array<double, 3>& busy,
                         std::vector<double> latencies, int max_in_flight);

}  // namespace detail

/// Runs source -> f1 -> f2 -> f3 -> sink either on three workers joined by bounded queues, or inline.
/// The stage functions own their state and see frames strictly in order in both modes.
template <typename M1, typename M2>
PipelineReport run_stages(const FrameSource& source, const std::function<M1(Frame)>& f1,
                          const std::function<M2(M1)>& f2, const std::function<Frame(M2)>& f3, const FrameSink& sink,
                          const QueueConfig& queues, ExecMode mode)
{
    using detail::clock;
    using detail::seconds;
    std::array<double, 3> busy{};
    std::vector<double> latencies;
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
    int frames = 0;

    const auto t0 = clock::now();
    auto enter = [&] {
        const int now = ++in_flight;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now))
        {
        }
    };

    if (mode == ExecMode::Sequential)
    {
        while (true)
        {
            auto frame = source();
            if (!frame)
                break;
            const auto entered = clock::now();
            enter();
            auto a = clock::now();
            M1 m1 = f1(std::move(*frame));
            auto b = clock::now();
            M2 m2 = f2(std::move(m1));
            auto c = clock::now();
            Frame out = f3(std::move(m2));
            auto d = clock::now();
            sink(std::move(out));
            --in_flight;
            busy[0] += seconds(a, b);
            busy[1] += seconds(b, c);
            busy[2] += seconds(c, d);
            latencies.push_back(seconds(entered, clock::now()));
            ++frames;
        }
        return detail::summarize(mode, frames, seconds(t0, clock::now()), busy, std::move(latencies),
                                 max_in_flight.load());
    }

    queues.validate();
    BoundedQueue<detail::Stamped<M1>> q1(std::size_t(queues.capacity_me_mp));
    BoundedQueue<detail::Stamped<M2>> q2(std::size_t(queues.capacity_mp_mc));
    std::mutex error_mutex;
    std::exception_ptr error;
    auto fail = [&](std::exception_ptr e) {
        {
            std::lock_guard lock(error_mutex);
            if (!error)
                error = e;
        }
        q1.abort();
        q2.abort();
    };

    std::thread estimator([&] {
        try
        {
            while (true)
            {
                auto frame = source();
                if (!frame)
                    break;
                const auto entered = clock::now();
                enter();
                M1 m1 = f1(std::move(*frame));
                busy[0] += seconds(entered, clock::now());
                if (!q1.push({std::move(m1), entered}))
                    return;
            }
            q1.finish();
        }
        catch (...)
        {
            fail(std::current_exception());
        }
    });
    std::thread propagator([&] {
        try
        {
            while (auto item = q1.pop())
            {
                const auto a = clock::now();
                M2 m2 = f2(std::move(item->value));
                busy[1] += seconds(a, clock::now());
                if (!q2.push({std::move(m2), item->entered}))
                    return;
            }
            q2.finish();
        }
        catch (...)
        {
            fail(std::current_exception());
        }
    });
    std::thread compensator([&] {
        try
        {
            while (auto item = q2.pop())
            {
                const auto a = clock::now();
                Frame out = f3(std::move(item->value));
                busy[2] += seconds(a, clock::now());
                sink(std::move(out));
                --in_flight;
                latencies.push_back(seconds(item->entered, clock::now()));
                ++frames;
            }
        }
        catch (...)
        {
            fail(std::current_exception());
        }
    });
    estimator.join();
    propagator.join();
    compensator.join();
    if (error)
        std::rethrow_exception(error);
    return detail::summarize(mode, frames, seconds(t0, clock::now()), busy, std::move(latencies),
                             max_in_flight.load());
}

}  // namespace causalstab
