// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "causalstab/geometry.hpp"
#include "causalstab/metrics.hpp"
#include "causalstab/renderer.hpp"
#include "causalstab/stabilizer.hpp"
#include "causalstab/synth.hpp"

using namespace causalstab;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---------------------------------------------------------------------------------------------

Outcome formula_constants()
{
    const Eigen::VectorXd alpha = temporal_weights(3, 2.0);
    const Eigen::VectorXd gamma = frequency_weights(7, 0.1);
    // exp(-d/2) normalised over d = 1..3, and 0.1 (m / 3.5)^2 for m = 1..3 (w_m = 2 pi m / 7).
    double z = 0;
    for (int d = 1; d <= 3; ++d)
        z += std::exp(-d / 2.0);
    bool ok = alpha.size() == 3 && gamma.size() == 3;
    const double want_alpha[3] = {0.5065, 0.3072, 0.1863}, want_gamma[3] = {0.008163, 0.032653, 0.073469};
    for (int i = 0; ok && i < 3; ++i)
    {
        ok &= std::abs(alpha(i) - want_alpha[i]) <= 1e-4;
        ok &= std::abs(alpha(i) - std::exp(-(i + 1) / 2.0) / z) <= 1e-12;
        ok &= std::abs(gamma(i) - want_gamma[i]) <= 1e-6;
        ok &= std::abs(gamma(i) - 0.1 * std::pow((i + 1) / 3.5, 2)) <= 1e-12;
    }
    ok &= std::abs(alpha.sum() - 1.0) <= 1e-9;
    return {ok, fmt("alpha = (%.4f, %.4f, %.4f), gamma_3 = %.6f", alpha(0), alpha(1), alpha(2), gamma(2))};
}

// ---------------------------------------------------------------------------------------------

double top_quartile_energy(const std::vector<double>& x)
{
    const int n = int(x.size()), top = n / 2, low = int(std::ceil(0.75 * top));
    double e = 0;
    for (int k = low; k <= top; ++k)
    {
        std::complex<double> acc = 0;
        for (int t = 0; t < n; ++t)
            acc += x[std::size_t(t)] * std::polar(1.0, -2 * std::numbers::pi * k * t / n);
        e += std::norm(acc);
    }
    return e;
}

MotionSample lattice_sample(const GridSpec& grid, const GridMotionField& dg, int n = 8)
{
    MotionSample m;
    m.width = grid.frame_width;
    m.height = grid.frame_height;
    m.resize(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
        {
            const Point2 p((j + 0.5) * (grid.frame_width - 1) / n, (i + 0.5) * (grid.frame_height - 1) / n);
            m.keypoints.row(i * n + j) = p.transpose();
            m.displacements.row(i * n + j) = dg.sample(p).transpose();
        }
    m.confidences.setOnes();
    return m;
}

Outcome smoothing_efficacy()
{
    const int frames = 120;
    SceneConfig sc;
    TrajectoryConfig tc;
    tc.jitter = JitterProfile::Alternating;
    tc.jitter_amplitude = 2.0;
    tc.seed = 1;
    const GridSpec grid{16, 16, sc.width, sc.height};
    const SynthSequence seq = render_sequence(make_scene(sc), gen_trajectory(tc, frames), grid);

    SmootherConfig cfg = SmootherConfig::profile(LossProfile::Appendix);
    cfg.window = 7;
    TrajectorySmoother sm(grid, cfg);
    std::vector<double> ox, oy, sx, sy;
    for (int t = 0; t < frames; ++t)
    {
        const GridMotionField& dg = seq.motion[std::size_t(t)];
        const SmoothedFrame r = sm.step(dg, lattice_sample(grid, dg));
        const Pairsd& rest = sm.buffer().rest;
        ox.push_back((r.raw - rest).col(0).mean());
        oy.push_back((r.raw - rest).col(1).mean());
        sx.push_back((r.smoothed - rest).col(0).mean());
        sy.push_back((r.smoothed - rest).col(1).mean());
    }
    const double ex = top_quartile_energy(sx) / top_quartile_energy(ox);
    const double ey = top_quartile_energy(sy) / top_quartile_energy(oy);
    const double raw_s = std::min(low_band_ratio(ox), low_band_ratio(oy));
    const double stab_s = std::min(low_band_ratio(sx), low_band_ratio(sy));
    const bool ok = ex <= 0.2 && ey <= 0.2 && stab_s - raw_s >= 0.25;
    return {ok, fmt("top-quartile energy ratio x %.3f y %.3f; stability raw %.3f -> smoothed %.3f", ex, ey, raw_s,
                    stab_s)};
}

// ---------------------------------------------------------------------------------------------

Outcome multi_homography_benefit()
{
    SceneConfig sc;
    sc.margin = 110;
    sc.plane_boundary = sc.width / 2.0;
    sc.disparity_x = 4.0;
    sc.disparity_y = -2.0;
    sc.seed = 2;
    TrajectoryConfig tc;
    tc.jitter_amplitude = 1.0;
    const GridSpec grid{16, 16, sc.width, sc.height};
    const SynthSequence seq = render_sequence(make_scene(sc), gen_trajectory(tc, 16), grid);

    ObserverConfig oc;
    RansacConfig rc;
    double residual[2] = {0, 0};
    int count = 0;
    for (std::size_t t = 1; t < 9; ++t)
    {
        const MotionSample m = observe_motion(seq.frames[t - 1], seq.frames[t], oc);
        for (int k = 1; k <= 2; ++k)
        {
            PropagationConfig pc;
            pc.k_homo = k;
            const PropagationResult r = propagate_detailed(m, grid, pc, rc);
            for (Eigen::Index i = 0; i < m.size(); ++i)
            {
                if (m.confidences(i) <= 0)
                    continue;
                const Point2 p = m.keypoints.row(i).transpose();
                residual[k - 1] += (m.displacements.row(i).transpose() - r.base.sample(p)).norm();
                count += k == 1;
            }
        }
    }
    residual[0] /= count;
    residual[1] /= count;
    return {residual[1] <= 0.5 * residual[0],
            fmt("mean keypoint residual K=1 %.3f px, K=2 %.3f px (ratio %.3f)", residual[0], residual[1],
                residual[1] / residual[0])};
}

// ---------------------------------------------------------------------------------------------

Outcome pipeline_laws()
{
    const QueueConfig q;
    const int bound = q.capacity_me_mp + q.capacity_mp_mc + 3;
    bool ok = true;
    std::string detail;
    for (const StageDelays d : {StageDelays{10, 10, 10}, StageDelays{30, 10, 10}})
    {
        const double slowest = std::max({d.est_ms, d.prop_ms, d.comp_ms});
        const double fps_law = 1000.0 / slowest, speedup_law = (d.est_ms + d.prop_ms + d.comp_ms) / slowest;
        const PipelineReport pipe = run_sleep_harness(300, d, q, ExecMode::Pipeline);
        const PipelineReport seq = run_sleep_harness(300, d, q, ExecMode::Sequential);
        const double speedup = seq.wall_time / pipe.wall_time;
        ok &= std::abs(pipe.measured_fps - fps_law) <= 0.15 * fps_law;
        ok &= std::abs(speedup - speedup_law) <= 0.15 * speedup_law;
        ok &= pipe.max_in_flight <= bound;
        detail += fmt("(%g,%g,%g) ", d.est_ms, d.prop_ms, d.comp_ms) +
                  fmt("fps %.1f/%.1f speedup %.3f/%.3f ", pipe.measured_fps, fps_law, speedup, speedup_law) +
                  fmt("in-flight %g<=%g; ", pipe.max_in_flight, bound);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------------------------

struct Clip
{
    std::vector<Frame> frames;
};

Clip synth_clip(std::uint64_t seed, int frames)
{
    SceneConfig sc;
    sc.width = 96;
    sc.height = 72;
    sc.seed = seed;
    TrajectoryConfig tc;
    tc.seed = seed;
    tc.smooth_x = 6;
    tc.smooth_y = 3;
    tc.jitter = seed % 2 ? JitterProfile::HighBand : JitterProfile::Alternating;
    return {render_sequence(make_scene(sc), gen_trajectory(tc, frames), {4, 4, sc.width, sc.height}).frames};
}

std::vector<Frame> run_clip(const std::vector<Frame>& frames, std::size_t limit, StabConfig cfg, ExecMode mode)
{
    cfg.mode = mode;
    std::size_t next = 0;
    FrameSource source = [&]() -> std::optional<Frame> {
        if (next >= std::min(limit, frames.size()))
            return std::nullopt;
        return frames[next++];
    };
    std::vector<Frame> out;
    stabilize(source, [&](Frame f) { out.push_back(std::move(f)); }, cfg);
    return out;
}

StabConfig clip_config(int variant, std::uint64_t seed)
{
    StabConfig c;
    c.grid_rows = c.grid_cols = 8;
    c.propagation.seed = c.ransac.seed = seed;
    if (variant == 1)
    {
        c.propagation.k_homo = 1;
        c.observer.flow_mode = FlowMode::Sparse;
        c.smoother = SmootherConfig::profile(LossProfile::Core);
        c.smoother.scope = KernelScope::PerVertex;
        c.render.policy = BorderPolicy::None;
        c.queues = {1, 2};
    }
    return c;
}

bool same_frames(const std::vector<Frame>& a, const std::vector<Frame>& b, std::size_t n)
{
    if (a.size() < n || b.size() < n)
        return false;
    for (std::size_t i = 0; i < n; ++i)
        if (a[i].data != b[i].data || a[i].width != b[i].width || a[i].height != b[i].height)
            return false;
    return true;
}

Outcome pipeline_equivalence()
{
    int identical = 0, runs = 0;
    for (std::uint64_t seed : {11u, 12u, 13u})
    {
        const Clip clip = synth_clip(seed, 20);
        for (int variant = 0; variant < 2; ++variant)
        {
            const StabConfig cfg = clip_config(variant, seed);
            const auto a = run_clip(clip.frames, clip.frames.size(), cfg, ExecMode::Pipeline);
            const auto b = run_clip(clip.frames, clip.frames.size(), cfg, ExecMode::Sequential);
            identical += a.size() == clip.frames.size() && same_frames(a, b, clip.frames.size());
            ++runs;
        }
    }
    return {identical == runs, fmt("%g of %g seed/config runs byte-identical", identical, runs)};
}

// ---------------------------------------------------------------------------------------------

Outcome causality()
{
    const Clip clip = synth_clip(21, 56);
    const StabConfig cfg = clip_config(0, 21);
    const auto full = run_clip(clip.frames, clip.frames.size(), cfg, ExecMode::Pipeline);
    bool ok = full.size() == clip.frames.size();
    std::string detail;
    for (std::size_t T : {5u, 20u, 50u})
    {
        const auto cut = run_clip(clip.frames, T + 1, cfg, ExecMode::Pipeline);
        const bool same = cut.size() == T + 1 && same_frames(full, cut, T + 1);
        ok &= same;
        detail += fmt("T=%g ", double(T)) + (same ? "identical; " : "differs; ");
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------------------------

double naive_sample(const Planed& img, double x, double y)
{
    const double w = double(img.cols()), h = double(img.rows());
    x = std::min(std::max(x, 0.0), w - 1);
    y = std::min(std::max(y, 0.0), h - 1);
    const double fx0 = std::floor(x), fy0 = std::floor(y);
    const int x0 = int(fx0), y0 = int(fy0);
    const int x1 = std::min(x0 + 1, int(w) - 1), y1 = std::min(y0 + 1, int(h) - 1);
    const double ax = x - fx0, ay = y - fy0;
    return (1 - ay) * ((1 - ax) * img(y0, x0) + ax * img(y0, x1)) + ay * ((1 - ax) * img(y1, x0) + ax * img(y1, x1));
}

Outcome geometry_oracles()
{
    int recovered = 0;
    double worst_rmse = 0;
    for (int trial = 0; trial < 100; ++trial)
    {
        std::mt19937_64 rng(1000 + trial);
        std::uniform_real_distribution<double> jitter(-1, 1), pos(0, 640), wide(-200, 840);
        std::normal_distribution<double> noise(0, 0.2);
        Eigen::Matrix3d m;
        m << 1 + 0.05 * jitter(rng), 0.05 * jitter(rng), 20 * jitter(rng), 0.05 * jitter(rng), 1 + 0.05 * jitter(rng),
            20 * jitter(rng), 1e-4 * jitter(rng), 1e-4 * jitter(rng), 1;
        const Homography truth = Homography::from_matrix(m);
        std::vector<Correspondence> corrs;
        std::vector<bool> inlier;
        for (int i = 0; i < 100; ++i)
        {
            const Point2 p(pos(rng), pos(rng) * 0.75);
            const bool good = i % 10 >= 3;
            Point2 q = good ? Point2(project(truth, p) + Point2(noise(rng), noise(rng))) : Point2(wide(rng), wide(rng));
            corrs.push_back({p, q, 1.0});
            inlier.push_back(good);
        }
        RansacConfig rc;
        rc.seed = std::uint64_t(trial);
        try
        {
            const RansacResult r = estimate_homography_ransac(corrs, rc);
            double se = 0;
            int n = 0;
            for (std::size_t i = 0; i < corrs.size(); ++i)
                if (inlier[i])
                {
                    se += (project(r.h, corrs[i].src) - project(truth, corrs[i].src)).squaredNorm();
                    ++n;
                }
            const double rmse = std::sqrt(se / n);
            worst_rmse = std::max(worst_rmse, rmse);
            recovered += rmse < 0.5;
        }
        catch (const Error&)
        {
        }
    }

    // Warp against a per-pixel resampler built from scratch.
    const GridSpec spec{5, 6, 61, 47};
    Planed img(47, 61);
    for (int y = 0; y < 47; ++y)
        for (int x = 0; x < 61; ++x)
            img(y, x) = 128 + 60 * std::sin(0.31 * x) * std::cos(0.23 * y) + 0.5 * x;
    CompensationField field(spec);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            field.vectors.at(r, c) << 3 * std::sin(0.9 * r + 0.4 * c), 2.5 * std::cos(0.7 * c - 0.3 * r);
    const Planed warped = warp_planes({img}, field)[0];
    double worst_px = 0;
    for (int y = 0; y < 47; ++y)
        for (int x = 0; x < 61; ++x)
        {
            const double gx = x / spec.step_x(), gy = y / spec.step_y();
            const int c0 = std::min(int(gx), spec.cols - 2), r0 = std::min(int(gy), spec.rows - 2);
            const double ax = gx - c0, ay = gy - r0;
            Vec2 mv = (1 - ax) * (1 - ay) * field.vectors.at(r0, c0).transpose() +
                      ax * (1 - ay) * field.vectors.at(r0, c0 + 1).transpose() +
                      (1 - ax) * ay * field.vectors.at(r0 + 1, c0).transpose() +
                      ax * ay * field.vectors.at(r0 + 1, c0 + 1).transpose();
            worst_px = std::max(worst_px, std::abs(warped(y, x) - naive_sample(img, x - mv.x(), y - mv.y())));
        }
    return {recovered >= 99 && worst_px <= 1e-6,
            fmt("RANSAC %g/100 recovered (worst RMSE %.3f px); warp vs naive max diff %.2e", recovered, worst_rmse,
                worst_px)};
}

// ---------------------------------------------------------------------------------------------

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric)
{
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
    return (analytic - numeric).norm() / scale;
}

Eigen::VectorXd flat(const Pairsd& p)
{
    return Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
}

Eigen::VectorXd numeric_gradient(Pairsd x, const std::function<double(const Pairsd&)>& f, double h = 1e-6)
{
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double keep = x.data()[i];
        x.data()[i] = keep + h;
        const double up = f(x);
        x.data()[i] = keep - h;
        const double down = f(x);
        x.data()[i] = keep;
        g(i) = (up - down) / (2 * h);
    }
    return g;
}

Outcome gradient_checks()
{
    const GridSpec spec{8, 8, 141, 113};
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1, 1), px(0, 140), py(0, 112);
    double worst[4] = {0, 0, 0, 0};

    for (int instance = 0; instance < 3; ++instance)
    {
        // L_kp over the grid motion.
        MotionSample m;
        m.width = spec.frame_width;
        m.height = spec.frame_height;
        m.resize(60);
        for (int i = 0; i < 60; ++i)
        {
            m.keypoints.row(i) << px(rng), py(rng);
            m.displacements.row(i) << 3 * u(rng), 3 * u(rng);
            m.confidences(i) = 0.5 + 0.5 * std::abs(u(rng));
        }
        GridMotionField dg(spec);
        for (Eigen::Index i = 0; i < dg.vectors.data.size(); ++i)
            dg.vectors.data.data()[i] = 2 * u(rng);
        Field2d g_kp;
        loss_kp(dg, m, 1e-3, &g_kp);
        const auto kp = [&](const Pairsd& v) {
            GridMotionField d = dg;
            d.vectors.data = v;
            return loss_kp(d, m, 1e-3);
        };
        worst[0] = std::max(worst[0], relative_error(flat(g_kp.data), numeric_gradient(dg.vectors.data, kp)));

        // L_time and L_freq over the newest smoothed state.
        SmootherConfig cfg = SmootherConfig::profile(LossProfile::Appendix);
        Pairsd rest(spec.size(), 2);
        for (int r = 0; r < spec.rows; ++r)
            for (int c = 0; c < spec.cols; ++c)
                rest.row(Eigen::Index(r) * spec.cols + c) = spec.vertex(r, c).transpose();
        std::vector<Pairsd> states(std::size_t(cfg.window));
        for (auto& s : states)
        {
            s = rest;
            for (Eigen::Index i = 0; i < s.size(); ++i)
                s.data()[i] += 4 * u(rng);
        }
        const auto window_with = [&](const Pairsd& newest) {
            StateWindow w{&newest};
            for (std::size_t i = 1; i < states.size(); ++i)
                w.push_back(&states[i]);
            return w;
        };
        Pairsd g_time = Pairsd::Zero(spec.size(), 2), g_freq = Pairsd::Zero(spec.size(), 2);
        loss_time(window_with(states[0]), cfg, cfg.beta, &g_time);
        loss_freq(window_with(states[0]), rest, cfg, &g_freq);
        worst[1] = std::max(worst[1], relative_error(flat(g_time), numeric_gradient(states[0], [&](const Pairsd& s) {
                                                         return loss_time(window_with(s), cfg, cfg.beta);
                                                     })));
        worst[2] = std::max(worst[2], relative_error(flat(g_freq), numeric_gradient(states[0], [&](const Pairsd& s) {
                                                         return loss_freq(window_with(s), rest, cfg);
                                                     })));

        // L_spatial over deformed vertex positions.
        Pairsd pos = rest;
        for (Eigen::Index i = 0; i < pos.size(); ++i)
            pos.data()[i] += 2 * u(rng);
        Pairsd g_sp = Pairsd::Zero(spec.size(), 2);
        loss_spatial(spec, pos, cfg, &g_sp);
        worst[3] = std::max(worst[3], relative_error(flat(g_sp), numeric_gradient(pos, [&](const Pairsd& p) {
                                                         return loss_spatial(spec, p, cfg);
                                                     })));
    }
    const bool ok = worst[0] <= 1e-4 && worst[1] <= 1e-4 && worst[2] <= 1e-4 && worst[3] <= 1e-4;
    return {ok, fmt("max relative error kp %.1e time %.1e freq %.1e spatial %.1e", worst[0], worst[1], worst[2],
                    worst[3])};
}

// ---------------------------------------------------------------------------------------------

FrameTransformSeries translation_series(const std::vector<double>& path)
{
    FrameTransformSeries s;
    for (std::size_t t = 0; t < path.size(); ++t)
        s.push(Homography::translation(t ? path[t] - path[t - 1] : 0.0, 0.0));
    return s;
}

std::vector<double> sinusoid(int n, int bin)
{
    std::vector<double> x;
    for (int t = 0; t < n; ++t)
        x.push_back(5 * std::sin(2 * std::numbers::pi * bin * t / n + 0.3));
    return x;
}

Outcome metric_closed_forms()
{
    FrameTransformSeries identity;
    for (int t = 0; t < 64; ++t)
        identity.push(Homography::identity());
    const double c = cropping_ratio(identity, 100, 80), d = distortion_value(identity),
                 s = stability_score(identity);

    Eigen::Matrix3d stretch = Eigen::Matrix3d::Identity();
    stretch(0, 0) = 2;
    const double dt = frame_distortion(Homography::from_matrix(stretch));

    const double s3 = stability_score(translation_series(sinusoid(128, 3)));
    const double s20 = stability_score(translation_series(sinusoid(128, 20)));

    Frame black(0, 16, 16, 1), white(0, 16, 16, 1);
    std::fill(white.data.begin(), white.data.end(), std::uint8_t(255));
    const double p = psnr(black, white);

    const bool ok = c == 1.0 && std::abs(d - 1.0) < 1e-12 && s == 1.0 && std::abs(dt - 0.5) < 1e-12 &&
                    std::abs(s3 - 1.0) < 1e-9 && s20 <= 0.02 && p == 0.0;
    return {ok, fmt("identity C %.3f D %.3f S %.3f; ", c, d, s) + fmt("D_t %.3f; S bin3 %.4f bin20 %.4f; ", dt, s3, s20) +
                    fmt("PSNR %.1f dB", p)};
}

// ---------------------------------------------------------------------------------------------

Outcome crop_math()
{
    const BorderReport r = BorderReport::from_borders(10, 10, 100, 100);
    const GridSpec spec{5, 5, 100, 100};
    CompensationField m(spec);
    for (int i = 0; i < 5; ++i)
    {
        m.vectors.at(i, 0) << 10, 0;
        m.vectors.at(0, i)(1) = 10;
    }
    const BorderReport measured = measure_borders(m, 100, 100);
    const bool ok = r.crop_ratio == 0.64 && r.scale_w == 1.25 && r.scale_h == 1.25 && r.scale_iso == 1.25 &&
                    measured.crop_ratio == 0.64 && measured.scale_iso == 1.25;
    return {ok, fmt("C %.4f scale_w %.4f scale_h %.4f s %.4f", r.crop_ratio, r.scale_w, r.scale_h, r.scale_iso)};
}

// ---------------------------------------------------------------------------------------------

Outcome solver_near_optimality()
{
    const SmootherConfig cfg = SmootherConfig::profile(LossProfile::Appendix);
    double worst = 0;
    int within = 0;
    for (int seed = 0; seed < 20; ++seed)
    {
        TrajectoryConfig tc;
        tc.seed = std::uint64_t(seed);
        tc.jitter = seed % 2 ? JitterProfile::HighBand : JitterProfile::Alternating;
        const SynthTrajectory traj = gen_trajectory(tc, 120);
        TrajectorySmoother sm(series_grid(), cfg);
        double solver = 0, oracle = 0;
        for (int t = 0; t < traj.frames(); ++t)
        {
            const double dx = t == 0 ? 0.0 : traj.total(t).tx - traj.total(t - 1).tx;
            TrajectoryBuffer probe = sm.buffer();
            append_and_integrate(probe, series_motion(dx, t));
            const SmoothedFrame r = sm.step(series_motion(dx, t), {});
            if (probe.history() == 0)
                continue;
            solver += smoother_objective(probe, r.kernels, {}, cfg).total;
            oracle += oracle_kernels(probe, {}, cfg).objective;
        }
        const double ratio = solver / oracle;
        worst = std::max(worst, ratio);
        within += ratio <= 1.10;
    }
    return {within == 20, fmt("%g/20 series within 10%% of the lattice oracle (worst ratio %.4f)", within, worst)};
}

}  // namespace

int main(int argc, char** argv)
{
    struct Criterion
    {
        int id;
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {1, "formula constants", formula_constants},
        {2, "smoothing efficacy on synthetic jitter", smoothing_efficacy},
        {3, "multi-homography benefit", multi_homography_benefit},
        {4, "pipeline laws", pipeline_laws},
        {5, "pipeline/sequential equivalence", pipeline_equivalence},
        {6, "causality", causality},
        {7, "geometry oracles", geometry_oracles},
        {8, "gradient checks", gradient_checks},
        {9, "metric closed forms", metric_closed_forms},
        {10, "crop/scale math", crop_math},
        {11, "kernel-solver near-optimality", solver_near_optimality},
    };
    int failed = 0;
    for (const auto& c : criteria)
    {
        if (argc > 1 && std::to_string(c.id) != argv[1])
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2d %s: %s (%s) [%.1f s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
