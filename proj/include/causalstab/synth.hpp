#pragma once

#include <cstdint>
#include <vector>

#include "causalstab/image.hpp"
#include "causalstab/smoother.hpp"

namespace causalstab
{

enum class JitterProfile
{
    /// +-amplitude with alternating sign every frame (the Nyquist bin).
    Alternating,
    /// Random-phase sinusoids spread over the top quarter of the spectrum.
    HighBand,
};

struct TrajectoryConfig
{
    /// Peak amplitudes of the smooth path.
    double smooth_x = 8.0;
    double smooth_y = 4.0;
    double smooth_rotation = 0.0;
    double smooth_scale = 0.0;
    /// Highest DFT bin used by the smooth path (kept below 6).
    int smooth_max_bin = 3;
    double jitter_amplitude = 2.0;
    JitterProfile jitter = JitterProfile::Alternating;
    /// Jitter applied to rotation, in radians.
    double jitter_rotation = 0.0;
    std::uint64_t seed = 0;
};

struct PathPose
{
    double tx = 0;
    double ty = 0;
    double rotation = 0;
    double scale = 0;
};

struct SynthTrajectory
{
    std::vector<PathPose> smooth;
    std::vector<PathPose> jitter;

    int frames() const { return int(smooth.size()); }
    PathPose total(int t) const;
};

/// Deterministic per seed; the smooth component does not depend on the seed.
SynthTrajectory gen_trajectory(const TrajectoryConfig& cfg, int frames);

struct SceneConfig
{
    int width = 160;
    int height = 120;
    /// Texture margin around the viewport, in pixels.
    int margin = 40;
    int squares = 600;
    std::uint64_t seed = 0;
    /// Frame columns at or beyond this x belong to the second plane (<= 0 disables it).
    double plane_boundary = 0;
    /// Extra per-frame translation of the second plane.
    double disparity_x = 0;
    double disparity_y = 0;
};

struct SynthScene
{
    SceneConfig cfg;
    Planed texture;
};

SynthScene make_scene(const SceneConfig& cfg);

struct SynthSequence
{
    std::vector<Frame> frames;
    /// Frame -> texture mapping of the camera per frame.
    std::vector<Homography> absolute;
    /// absolute[t-1]^-1 * absolute[t]: maps a point of frame t to its source in frame t-1 (identity at t = 0).
    std::vector<Homography> relative;
    /// True Δg per frame in the observer's convention (g minus its source position).
    std::vector<GridMotionField> motion;
};

/// Camera pose of frame t: rotation and scale about the frame centre, then translation, into texture space.
Homography camera_homography(const SynthScene& scene, const PathPose& pose);

/// Renders each frame by sampling the texture. Throws ViewportUnderflow when a frame leaves the texture.
SynthSequence render_sequence(const SynthScene& scene, const SynthTrajectory& traj, const GridSpec& grid);

struct OracleStep
{
    KernelSet kernels;
    double objective = 0;
};

/// Exhaustive search of the x taps over {0, step, ..., tap_bound}^3 (y taps zero) on the objective of `buf`.
OracleStep oracle_kernels(const TrajectoryBuffer& buf, const MotionSample& m, const SmootherConfig& cfg,
                          double step = 0.25);

struct OracleSeries
{
    std::vector<double> smoothed;
    std::vector<double> objective;
};

/// Smooths a 1D series (x axis of every vertex of a 2x2 grid) with oracle taps at every frame.
OracleSeries oracle_smooth(const std::vector<double>& series, const SmootherConfig& cfg, double step = 0.25);

/// 2x2 grid on a 64x64 frame carrying one 1D series on every vertex.
GridSpec series_grid();
GridMotionField series_motion(double dx, int frame);

}  // namespace causalstab
