#include "causalstab/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "causalstab/geometry.hpp"

namespace causalstab
{

PathPose SynthTrajectory::total(int t) const
{
    const PathPose& s = smooth[std::size_t(t)];
    const PathPose& j = jitter[std::size_t(t)];
    return {s.tx + j.tx, s.ty + j.ty, s.rotation + j.rotation, s.scale + j.scale};
}

SynthTrajectory gen_trajectory(const TrajectoryConfig& cfg, int frames)
{
    if (frames < 16)
        throw Error(Errc::TooShort, "synthetic trajectories need at least 16 frames");
    if (cfg.smooth_max_bin < 1 || cfg.smooth_max_bin > 5)
        throw Error(Errc::ConfigError, "smooth_max_bin must be in [1, 5]");
    const double n = frames, two_pi = 2 * std::numbers::pi;
    SynthTrajectory traj;
    traj.smooth.resize(std::size_t(frames));
    traj.jitter.resize(std::size_t(frames));

    for (int t = 0; t < frames; ++t)
    {
        PathPose& p = traj.smooth[std::size_t(t)];
        for (int k = 1; k <= cfg.smooth_max_bin; ++k)
        {
            const double w = two_pi * k * t / n;
            p.tx += cfg.smooth_x / k * std::sin(w + 0.7 * k);
            p.ty += cfg.smooth_y / k * std::sin(w + 1.9 * k);
            p.rotation += cfg.smooth_rotation / k * std::sin(w + 0.3 * k);
            p.scale += cfg.smooth_scale / k * std::sin(w + 2.4 * k);
        }
    }
    // Start at rest.
    const PathPose origin = traj.smooth.front();
    for (auto& p : traj.smooth)
    {
        p.tx -= origin.tx;
        p.ty -= origin.ty;
        p.rotation -= origin.rotation;
        p.scale -= origin.scale;
    }

    std::mt19937_64 rng(cfg.seed);
    if (cfg.jitter == JitterProfile::Alternating)
    {
        std::bernoulli_distribution flip(0.5);
        const double sx = flip(rng) ? 1.0 : -1.0, sy = flip(rng) ? 1.0 : -1.0, sr = flip(rng) ? 1.0 : -1.0;
        for (int t = 0; t < frames; ++t)
        {
            const double s = t % 2 ? 1.0 : -1.0;
            traj.jitter[std::size_t(t)] = {s * sx * cfg.jitter_amplitude, s * sy * cfg.jitter_amplitude,
                                           s * sr * cfg.jitter_rotation, 0.0};
        }
    }
    else
    {
        const int top = frames / 2, low = int(std::ceil(0.75 * top));
        std::uniform_real_distribution<double> phase(0, two_pi);
        const int count = top - low + 1;
        for (int axis = 0; axis < 3; ++axis)
            for (int k = low; k <= top; ++k)
            {
                const double ph = phase(rng);
                const double amp = (axis == 2 ? cfg.jitter_rotation : cfg.jitter_amplitude) / std::sqrt(double(count));
                for (int t = 0; t < frames; ++t)
                {
                    const double v = amp * std::sin(two_pi * k * t / n + ph);
                    PathPose& j = traj.jitter[std::size_t(t)];
                    (axis == 0 ? j.tx : axis == 1 ? j.ty : j.rotation) += v;
                }
            }
    }
    return traj;
}

SynthScene make_scene(const SceneConfig& cfg)
{
    if (cfg.width < 16 || cfg.height < 16 || cfg.margin < 0)
        throw Error(Errc::ConfigError, "scene dimensions too small");
    SynthScene scene{cfg, {}};
    const int W = cfg.width + 2 * cfg.margin, H = cfg.height + 2 * cfg.margin;
    Planed tex(H, W);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ph(0, 2 * std::numbers::pi);
    const double p1 = ph(rng), p2 = ph(rng);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            tex(y, x) = 110 + 25 * std::sin(0.07 * x + p1) * std::cos(0.05 * y + p2);
    std::uniform_int_distribution<int> px(0, W - 1), py(0, H - 1), side(3, 9), shade(20, 235);
    for (int i = 0; i < cfg.squares; ++i)
    {
        const int x0 = px(rng), y0 = py(rng), s = side(rng);
        const double v = shade(rng);
        for (int y = y0; y < std::min(H, y0 + s); ++y)
            for (int x = x0; x < std::min(W, x0 + s); ++x)
                tex(y, x) = v;
    }
    // Light 3x3 binomial blur so edges are trackable.
    Planed blurred = tex;
    const double k[3] = {0.25, 0.5, 0.25};
    for (int y = 1; y < H - 1; ++y)
        for (int x = 1; x < W - 1; ++x)
        {
            double acc = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    acc += k[dy + 1] * k[dx + 1] * tex(y + dy, x + dx);
            blurred(y, x) = acc;
        }
    scene.texture = std::move(blurred);
    return scene;
}

Homography camera_homography(const SynthScene& scene, const PathPose& pose)
{
    const double cx = (scene.cfg.width - 1) / 2.0, cy = (scene.cfg.height - 1) / 2.0;
    const double s = 1.0 + pose.scale, c = std::cos(pose.rotation), sn = std::sin(pose.rotation);
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) = s * c;
    m(0, 1) = -s * sn;
    m(1, 0) = s * sn;
    m(1, 1) = s * c;
    m(0, 2) = cx + scene.cfg.margin + pose.tx - (m(0, 0) * cx + m(0, 1) * cy);
    m(1, 2) = cy + scene.cfg.margin + pose.ty - (m(1, 0) * cx + m(1, 1) * cy);
    return Homography::from_matrix(m);
}

namespace
{

bool second_plane(const SceneConfig& cfg, double x)
{
    return cfg.plane_boundary > 0 && x >= cfg.plane_boundary;
}

Point2 texture_point(const SynthScene& scene, const Homography& cam, int t, const Point2& x)
{
    Point2 p = project(cam, x);
    if (second_plane(scene.cfg, x.x()))
        p += Point2(scene.cfg.disparity_x, scene.cfg.disparity_y) * t;
    return p;
}

}  // namespace

SynthSequence render_sequence(const SynthScene& scene, const SynthTrajectory& traj, const GridSpec& grid)
{
    const SceneConfig& cfg = scene.cfg;
    if (grid.frame_width != cfg.width || grid.frame_height != cfg.height)
        throw Error(Errc::DimensionMismatch, "grid does not match the scene frame size");
    const double tw = double(scene.texture.cols() - 1), th = double(scene.texture.rows() - 1);
    SynthSequence seq;
    for (int t = 0; t < traj.frames(); ++t)
    {
        const Homography cam = camera_homography(scene, traj.total(t));
        Frame f(t, cfg.width, cfg.height, 1);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x)
            {
                const Point2 p = texture_point(scene, cam, t, Point2(x, y));
                if (p.x() < 0 || p.y() < 0 || p.x() > tw || p.y() > th)
                    throw Error(Errc::ViewportUnderflow,
                                "frame " + std::to_string(t) + " leaves the texture; increase the margin");
                f.at(x, y) = std::uint8_t(std::clamp(std::lround(sample_plane(scene.texture, p.x(), p.y())), 0L, 255L));
            }
        seq.frames.push_back(std::move(f));
        seq.relative.push_back(t == 0 ? Homography::identity() : seq.absolute.back().inverse() * cam);

        GridMotionField dg(grid, t);
        if (t > 0)
        {
            const Homography prev_inv = seq.absolute.back().inverse();
            for (int r = 0; r < grid.rows; ++r)
                for (int c = 0; c < grid.cols; ++c)
                {
                    const Point2 g = grid.vertex(r, c);
                    Point2 tex = texture_point(scene, cam, t, g);
                    if (second_plane(cfg, g.x()))
                        tex -= Point2(cfg.disparity_x, cfg.disparity_y) * (t - 1);
                    const Point2 src = project(prev_inv, tex);
                    dg.vectors.at(r, c) = (g - src).transpose();
                }
        }
        seq.motion.push_back(std::move(dg));
        seq.absolute.push_back(cam);
    }
    return seq;
}

GridSpec series_grid()
{
    return {2, 2, 64, 64};
}

GridMotionField series_motion(double dx, int frame)
{
    GridMotionField f(series_grid(), frame);
    for (Eigen::Index i = 0; i < f.vectors.data.rows(); ++i)
        f.vectors.data.row(i) << dx, 0.0;
    return f;
}

OracleStep oracle_kernels(const TrajectoryBuffer& buf, const MotionSample& m, const SmootherConfig& cfg, double step)
{
    const int levels = int(std::floor(cfg.tap_bound / step + 1e-9)) + 1;
    OracleStep best;
    best.kernels = KernelSet::zeros(KernelScope::Global, buf.spec.size());
    best.kernels.beta = cfg.beta;
    best.objective = smoother_objective(buf, best.kernels, m, cfg).total;
    KernelSet k = best.kernels;
    for (int a = 0; a < levels; ++a)
        for (int b = 0; b < levels; ++b)
            for (int c = 0; c < levels; ++c)
            {
                k.taps.row(0) << a * step, b * step, c * step, 0, 0, 0;
                const double v = smoother_objective(buf, k, m, cfg).total;
                if (v < best.objective)
                {
                    best.objective = v;
                    best.kernels = k;
                }
            }
    return best;
}

OracleSeries oracle_smooth(const std::vector<double>& series, const SmootherConfig& cfg, double step)
{
    TrajectoryBuffer buf(series_grid(), cfg.window);
    OracleSeries out;
    for (std::size_t t = 0; t < series.size(); ++t)
    {
        append_and_integrate(buf, series_motion(t == 0 ? 0.0 : series[t] - series[t - 1], int(t)));
        OracleStep best{KernelSet::zeros(KernelScope::Global, buf.spec.size()), 0.0};
        if (buf.history() > 0)
            best = oracle_kernels(buf, {}, cfg, step);
        const Pairsd s = smooth_step(buf, best.kernels, cfg.lambda_blend);
        out.objective.push_back(buf.history() > 0 ? best.objective : 0.0);
        out.smoothed.push_back(s(0, 0) - buf.rest(0, 0));
        buf.smoothed.push_back(s);
        while (int(buf.smoothed.size()) > cfg.window)
            buf.smoothed.pop_front();
    }
    return out;
}

}  // namespace causalstab
