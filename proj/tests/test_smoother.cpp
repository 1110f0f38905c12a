#include <gtest/gtest.h>

#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "causalstab/smoother.hpp"

using namespace causalstab;

namespace
{

const GridSpec kTiny{2, 2, 64, 64};

GridMotionField uniform_motion(const GridSpec& spec, double dx, double dy, int index = 0)
{
    GridMotionField f(spec, index);
    for (Eigen::Index i = 0; i < f.vectors.data.rows(); ++i)
        f.vectors.data.row(i) << dx, dy;
    return f;
}

// Raw 1D series fed through the full smoother; returns S.x and O.x of vertex 0.
MotionSample keypoint_lattice(const GridSpec& spec, int n = 6)
{
    MotionSample m;
    m.width = spec.frame_width;
    m.height = spec.frame_height;
    m.resize(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m.keypoints.row(i * n + j) << (j + 0.5) * (spec.frame_width - 1) / n, (i + 0.5) * (spec.frame_height - 1) / n;
    m.confidences.setOnes();
    return m;
}

std::pair<std::vector<double>, std::vector<double>> run_series(const std::vector<double>& o, const SmootherConfig& cfg,
                                                               const GridSpec& spec = kTiny, bool keypoints = true)
{
    TrajectorySmoother sm(spec, cfg);
    const MotionSample m = keypoints ? keypoint_lattice(spec) : MotionSample{};
    std::vector<double> s_out, o_out;
    for (std::size_t t = 0; t < o.size(); ++t)
    {
        const double dx = t == 0 ? 0.0 : o[t] - o[t - 1];
        const auto r = sm.step(uniform_motion(spec, dx, 0, int(t)), m);
        s_out.push_back(r.smoothed(0, 0) - sm.buffer().rest(0, 0));
        o_out.push_back(r.raw(0, 0) - sm.buffer().rest(0, 0));
    }
    return {s_out, o_out};
}

double dft_energy(const std::vector<double>& x, int bin)
{
    std::complex<double> acc = 0;
    const double n = double(x.size());
    for (std::size_t d = 0; d < x.size(); ++d)
        acc += x[d] * std::polar(1.0, -2 * std::numbers::pi * bin * double(d) / n);
    return std::norm(acc);
}

Pairsd random_positions(const GridSpec& spec, unsigned seed, double amp)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    Pairsd p(spec.size(), 2);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            p.row(Eigen::Index(r) * spec.cols + c) = (spec.vertex(r, c) + Vec2(u(rng), u(rng))).transpose();
    return p;
}

void expect_gradient(const std::function<double(const Pairsd&, Pairsd*)>& fn, Pairsd x)
{
    Pairsd analytic;
    fn(x, &analytic);
    Pairsd numeric(x.rows(), 2);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double keep = x.data()[i];
        x.data()[i] = keep + h;
        const double up = fn(x, nullptr);
        x.data()[i] = keep - h;
        const double down = fn(x, nullptr);
        x.data()[i] = keep;
        numeric.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((analytic - numeric).cwiseAbs().maxCoeff() / scale, 1e-4);
}

struct History
{
    GridSpec spec{8, 8, 141, 141};
    TrajectoryBuffer buf{spec, 7};
    Pairsd candidate;

    explicit History(unsigned seed, int past = 6)
    {
        for (int i = 0; i < past; ++i)
        {
            buf.smoothed.push_back(random_positions(spec, seed + unsigned(i), 3.0));
            buf.raw.push_back(random_positions(spec, seed + 100 + unsigned(i), 3.0));
        }
        buf.raw.push_back(random_positions(spec, seed + 200, 3.0));
        candidate = random_positions(spec, seed + 300, 3.0);
    }
};

}  // namespace

TEST(SmootherConstants, TemporalWeights)
{
    const auto a = temporal_weights(3, 2.0);
    EXPECT_NEAR(a(0), 0.5065, 1e-4);
    EXPECT_NEAR(a(1), 0.3072, 1e-4);
    EXPECT_NEAR(a(2), 0.1863, 1e-4);
    for (int d : {1, 2, 5, 9})
        for (double tau : {0.3, 2.0, 11.0})
            EXPECT_NEAR(temporal_weights(d, tau).sum(), 1.0, 1e-12);
}

TEST(SmootherConstants, FrequencyWeights)
{
    const auto g = frequency_weights(7, 0.1);
    ASSERT_EQ(g.size(), 3);
    EXPECT_NEAR(g(0), 0.008163, 1e-6);
    EXPECT_NEAR(g(1), 0.032653, 1e-6);
    EXPECT_NEAR(g(2), 0.073469, 1e-6);
}

TEST(SmootherConfig, ProfilesAndValidation)
{
    const auto core = SmootherConfig::profile(LossProfile::Core);
    EXPECT_EQ(core.lambda_time, 1.0);
    EXPECT_EQ(core.lambda_freq, 0.1);
    EXPECT_EQ(core.lambda_spatial, 0.0);
    EXPECT_EQ(core.gamma0, 0.1);
    const auto app = SmootherConfig::profile(LossProfile::Appendix);
    EXPECT_EQ(app.lambda_time, 20.0);
    EXPECT_EQ(app.lambda_proj, 5.0);
    EXPECT_EQ(app.delta_max(), 3);
    SmootherConfig bad;
    bad.lambda_blend = 0;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(parse_profile("fancy"), Error);
}

TEST(Integrate, Examples)
{
    TrajectoryBuffer buf(kTiny, 7);
    for (int t = 0; t < 10; ++t)
        append_and_integrate(buf, GridMotionField(kTiny));
    EXPECT_EQ(buf.latest_raw(), buf.rest);
    EXPECT_EQ(int(buf.raw.size()), 7);

    TrajectoryBuffer ramp(kTiny, 7);
    for (int t = 0; t < 12; ++t)
    {
        append_and_integrate(ramp, uniform_motion(kTiny, 1, 0));
        EXPECT_DOUBLE_EQ(ramp.latest_raw()(3, 0), ramp.rest(3, 0) + t);
    }

    TrajectoryBuffer alt(kTiny, 7);
    for (int t = 0; t < 9; ++t)
    {
        append_and_integrate(alt, uniform_motion(kTiny, t % 2 ? 1 : -1, 0));
        EXPECT_DOUBLE_EQ(alt.latest_raw()(0, 0) - alt.rest(0, 0), t % 2 ? 1.0 : 0.0);
    }
    EXPECT_THROW(append_and_integrate(alt, GridMotionField(GridSpec{3, 3, 64, 64})), Error);
}

TEST(SmoothStep, Examples)
{
    TrajectoryBuffer buf(kTiny, 7);
    append_and_integrate(buf, GridMotionField(kTiny));
    auto k = KernelSet::zeros(KernelScope::Global, kTiny.size());
    EXPECT_EQ(smooth_step(buf, k, 100), buf.latest_raw());

    // Constant history is a fixed point.
    const Pairsd c = Pairsd::Constant(4, 2, 7.5);
    buf.raw.back() = c;
    buf.smoothed = {c, c, c};
    k.taps.row(0) << 1, 0, 0, 0.3, 1.7, 2;
    EXPECT_LE((smooth_step(buf, k, 100) - c).cwiseAbs().maxCoeff(), 1e-12);

    buf.smoothed = {Pairsd::Zero(4, 2)};
    buf.raw.back() = Pairsd::Ones(4, 2);
    k.taps.row(0) << 1, 0, 0, 1, 0, 0;
    EXPECT_NEAR(smooth_step(buf, k, 100)(0, 0), 1.0 / 101.0, 1e-15);
    k.taps.setZero();
    EXPECT_EQ(smooth_step(buf, k, 100), buf.raw.back());
}

TEST(LossTime, FloorForConstantAndLinear)
{
    SmootherConfig cfg;
    std::vector<Pairsd> states;
    for (int d = 0; d < 7; ++d)
        states.push_back(Pairsd::Constant(5, 2, 3.0));
    StateWindow w;
    for (auto& s : states)
        w.push_back(&s);
    const double floor = 1e-3 * (0.50648 + 0.30719 / 4 + 0.18632 / 9);
    EXPECT_NEAR(loss_time(w, cfg, 0.02), floor, 1e-7);
    EXPECT_NEAR(loss_time(w, cfg, 0.02), 6.04e-4, 1e-6);

    cfg.beta = 0;
    for (int d = 0; d < 7; ++d)
        states[std::size_t(d)].setConstant(10.0 - 2.0 * d);
    EXPECT_NEAR(loss_time(w, cfg, 0.0), floor, 1e-7);
}

TEST(LossTime, WarmupShrinksHorizon)
{
    SmootherConfig cfg;
    Pairsd a = Pairsd::Zero(1, 2), b = Pairsd::Ones(1, 2);
    EXPECT_EQ(loss_time({&a, &b}, cfg, 0.02), 0.0);
    Pairsd c = Pairsd::Zero(1, 2);
    // One lag only: alpha = 1, second difference (0 - 2 + 0).
    const double expect = std::exp(-0.02 * 2.0) * std::sqrt(8.0 + 1e-6);
    EXPECT_NEAR(loss_time({&a, &b, &c}, cfg, 0.02), expect, 1e-12);
}

TEST(LossFreq, ConstantAndAlternating)
{
    SmootherConfig cfg;
    cfg.gamma0 = 0.1;
    const Pairsd rest = Pairsd::Zero(1, 2);
    std::vector<Pairsd> states(7, Pairsd::Constant(1, 2, 4.0));
    StateWindow w;
    for (auto& s : states)
        w.push_back(&s);
    EXPECT_NEAR(loss_freq(w, rest, cfg), 0.0, 1e-20);

    std::vector<double> x;
    for (int d = 0; d < 7; ++d)
    {
        const double v = d % 2 ? -1.0 : 1.0;
        states[std::size_t(d)] << v, 0.0;
        x.push_back(v);
    }
    const auto g = frequency_weights(7, 0.1);
    double brute = 0;
    for (int m = 1; m <= 3; ++m)
        brute += g(m - 1) * dft_energy(x, m);
    EXPECT_NEAR(loss_freq(w, rest, cfg), brute, 1e-12);
    EXPECT_GT(g(2) * dft_energy(x, 3), 0.8 * brute);
}

TEST(LossSpatial, Examples)
{
    SmootherConfig cfg;
    const GridSpec spec{4, 5, 81, 61};
    TrajectoryBuffer buf(spec, 7);
    const double floor = (cfg.lambda_edge * 24 + cfg.lambda_angle * 24) * cfg.charbonnier_eps;
    EXPECT_NEAR(loss_spatial(spec, buf.rest, cfg), floor, 1e-12);

    const Pairsd scaled = 1.1 * buf.rest;
    const double edge = std::sqrt(0.01 + 1e-6);
    EXPECT_NEAR(loss_spatial(spec, scaled, cfg), 24 * edge + 24 * cfg.charbonnier_eps, 1e-9);

    Eigen::Matrix2d R;
    R << std::cos(0.7), -std::sin(0.7), std::sin(0.7), std::cos(0.7);
    const Pairsd rotated = (buf.rest * R.transpose()).rowwise() + Eigen::RowVector2d(5, -3);
    EXPECT_NEAR(loss_spatial(spec, rotated, cfg), floor, 1e-9);
}

TEST(LossProjSmooth, Examples)
{
    const GridSpec spec{4, 4, 61, 61};
    TrajectoryBuffer buf(spec, 7);
    const Pairsd O = random_positions(spec, 3, 2.0);
    MotionSample m;
    m.resize(3);
    m.keypoints << 5, 7, 30, 31, 59, 2;
    m.confidences.setOnes();
    EXPECT_NEAR(loss_proj_smooth(spec, O, O, m, 1e-3), 1e-3, 1e-12);
    const Pairsd shifted = O.rowwise() + Eigen::RowVector2d(1, 0);
    EXPECT_NEAR(loss_proj_smooth(spec, shifted, O, m, 1e-3), 1.0, 1e-6);
    m.confidences.setZero();
    EXPECT_EQ(loss_proj_smooth(spec, shifted, O, m, 1e-3), 0.0);
}

TEST(SmootherLosses, GradientsMatchFiniteDifferences)
{
    History h(17);
    SmootherConfig cfg;
    cfg.beta = 0.05;
    auto window_for = [&](const Pairsd& S) { return candidate_window(h.buf, S); };
    expect_gradient([&](const Pairsd& S, Pairsd* g) { return loss_time(window_for(S), cfg, cfg.beta, g); },
                    h.candidate);
    expect_gradient([&](const Pairsd& S, Pairsd* g) { return loss_freq(window_for(S), h.buf.rest, cfg, g); },
                    h.candidate);
    cfg.detrend = true;
    expect_gradient([&](const Pairsd& S, Pairsd* g) { return loss_freq(window_for(S), h.buf.rest, cfg, g); },
                    h.candidate);
    expect_gradient([&](const Pairsd& S, Pairsd* g) { return loss_spatial(h.spec, S, cfg, g); }, h.candidate);

    MotionSample m;
    m.resize(20);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0, 140), w(0.1, 1);
    for (int i = 0; i < 20; ++i)
    {
        m.keypoints.row(i) << u(rng), u(rng);
        m.confidences(i) = w(rng);
    }
    expect_gradient(
        [&](const Pairsd& S, Pairsd* g) { return loss_proj_smooth(h.spec, S, h.buf.latest_raw(), m, 1e-3, g); },
        h.candidate);
}

TEST(SmootherLosses, TapGradientMatchesFiniteDifferences)
{
    History h(5);
    MotionSample m;
    m.resize(6);
    for (int i = 0; i < 6; ++i)
    {
        m.keypoints.row(i) << 10 + 20 * i, 130 - 19 * i;
        m.confidences(i) = 1;
    }
    SmootherConfig cfg;
    cfg.lambda_blend = 3.0;
    for (auto scope : {KernelScope::Global, KernelScope::PerVertex})
    {
        auto k = KernelSet::zeros(scope, h.spec.size());
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> u(0.1, 1.5);
        for (Eigen::Index i = 0; i < k.taps.size(); ++i)
            k.taps.data()[i] = u(rng);
        KernelSet g;
        smoother_objective_grad(h.buf, k, m, cfg, g);
        const double step = 1e-6;
        double worst = 0, scale = 1e-8;
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(k.taps.size(), 60); ++i)
        {
            auto kp = k, km = k;
            kp.taps.data()[i] += step;
            km.taps.data()[i] -= step;
            const double num =
                (smoother_objective(h.buf, kp, m, cfg).total - smoother_objective(h.buf, km, m, cfg).total) /
                (2 * step);
            worst = std::max(worst, std::abs(num - g.taps.data()[i]));
            scale = std::max(scale, std::abs(num));
        }
        EXPECT_LE(worst / scale, 1e-4);
    }
}

TEST(SolveKernels, ZeroIterationsAndFlatObjective)
{
    SmootherConfig cfg;
    TrajectoryBuffer buf(kTiny, 7);
    for (int t = 0; t < 5; ++t)
    {
        append_and_integrate(buf, GridMotionField(kTiny));
        buf.smoothed.push_back(buf.latest_raw());
    }
    append_and_integrate(buf, GridMotionField(kTiny));
    auto init = KernelSet::zeros(KernelScope::Global, 4);
    init.taps.row(0) << 0.5, 0.25, 0, 1, 1, 1;
    EXPECT_EQ(solve_kernels(buf, {}, cfg, init).taps, init.taps);
    cfg.kernel_iters = 0;
    EXPECT_EQ(solve_kernels(buf, {}, cfg, init).taps, init.taps);
}

TEST(SolveKernels, NeverIncreasesObjective)
{
    for (unsigned seed : {1u, 2u, 3u})
    {
        History h(seed * 11);
        SmootherConfig cfg;
        auto init = KernelSet::zeros(KernelScope::Global, h.spec.size());
        init.taps.row(0) << 0.3, 0.1, 0.7, 1.2, 0, 0.4;
        const double before = smoother_objective(h.buf, init, {}, cfg).total;
        const auto k = solve_kernels(h.buf, {}, cfg, init);
        EXPECT_LE(smoother_objective(h.buf, k, {}, cfg).total, before);
        EXPECT_GE(k.taps.minCoeff(), -cfg.tap_bound);
        EXPECT_LE(k.taps.maxCoeff(), cfg.tap_bound);
    }
}

TEST(SmoothFrame, ZeroMotionStaysAtRest)
{
    TrajectorySmoother sm(kTiny, SmootherConfig{});
    for (int t = 0; t < 12; ++t)
    {
        const auto r = sm.step(GridMotionField(kTiny), {});
        EXPECT_EQ(r.smoothed, sm.buffer().rest);
        EXPECT_EQ(r.raw, sm.buffer().rest);
    }
}

TEST(SmoothFrame, JitterRemovedFromTopBin)
{
    std::vector<double> o;
    for (int t = 0; t < 60; ++t)
        o.push_back(0.3 * t + (t % 2 ? 2.0 : -2.0));
    const auto [s, raw] = run_series(o, SmootherConfig{});
    EXPECT_LE(dft_energy(s, 30), 0.2 * dft_energy(raw, 30));
}

TEST(SmoothFrame, StepResponseMonotoneWithoutOvershoot)
{
    std::vector<double> o(40, 0.0);
    for (std::size_t t = 10; t < o.size(); ++t)
        o[t] = 10.0;
    const auto [s, raw] = run_series(o, SmootherConfig{});
    for (std::size_t t = 1; t < s.size(); ++t)
    {
        EXPECT_GE(s[t], s[t - 1] - 1e-9) << "t=" << t;
        EXPECT_LE(s[t], 10.0 * 1.05);
    }
    EXPECT_GT(s.back(), 0.0);
}

TEST(SmoothFrame, StepFrameSolutionBeatsFollowing)
{
    SmootherConfig cfg;
    TrajectoryBuffer buf(kTiny, cfg.window);
    for (int t = 0; t < 10; ++t)
    {
        append_and_integrate(buf, GridMotionField(kTiny));
        buf.smoothed.push_back(buf.latest_raw());
    }
    append_and_integrate(buf, uniform_motion(kTiny, 10, 0));
    const auto m = keypoint_lattice(kTiny);
    const auto follow = KernelSet::zeros(KernelScope::Global, kTiny.size());
    const auto solved = solve_kernels(buf, m, cfg, follow);
    EXPECT_LT(smoother_objective(buf, solved, m, cfg).total, smoother_objective(buf, follow, m, cfg).total);
}

TEST(SmoothFrame, DeterministicPrefixes)
{
    std::mt19937 rng(4);
    std::normal_distribution<double> n(0, 2);
    std::vector<double> o{0};
    for (int t = 1; t < 30; ++t)
        o.push_back(o.back() + n(rng));
    const auto a = run_series(o, SmootherConfig{}).first;
    const auto b = run_series(std::vector<double>(o.begin(), o.begin() + 20), SmootherConfig{}).first;
    for (std::size_t t = 0; t < b.size(); ++t)
        EXPECT_EQ(a[t], b[t]);
}

TEST(SmoothFrame, WindowLengthsAndScopes)
{
    std::vector<double> o;
    for (int t = 0; t < 25; ++t)
        o.push_back(std::sin(0.3 * t) * 5 + (t % 2 ? 1 : -1));
    for (int L : {5, 7, 9})
        for (auto scope : {KernelScope::Global, KernelScope::PerVertex})
        {
            SmootherConfig cfg;
            cfg.window = L;
            cfg.scope = scope;
            const auto s = run_series(o, cfg, GridSpec{3, 3, 40, 40}).first;
            for (double v : s)
                EXPECT_TRUE(std::isfinite(v));
        }
}

TEST(SmoothFrame, TrajectoryDump)
{
    TrajectoryBuffer buf(kTiny, 7);
    std::ostringstream os;
    write_trajectory_dump(os, 3, kTiny, buf.rest, buf.rest);
    EXPECT_EQ(os.str().substr(0, 18), "3,0,0,0,0,0,0\n3,0,");
}
