#pragma once

#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

#include "causalstab/propagation.hpp"

namespace causalstab
{

enum class KernelScope
{
    Global,
    PerVertex,
};

enum class LossProfile
{
    Core,
    Appendix,
};

struct SmootherConfig
{
    double lambda_blend = 100.0;
    int window = 7;
    double tau_time = 2.0;
    double beta = 0.02;
    bool optimize_beta = false;
    double gamma0 = 1.0;
    double lambda_time = 20.0;
    double lambda_freq = 1.0;
    double lambda_spatial = 10.0;
    double lambda_proj = 5.0;
    double lambda_edge = 1.0;
    double lambda_angle = 1.0;
    double charbonnier_eps = 1e-3;
    double tap_bound = 2.0;
    int kernel_iters = 20;
    /// Initial projected-gradient step, in tap units.
    double kernel_step = 0.25;
    /// Also descend from constant taps 0, tap_bound/2 and tap_bound and keep the best result.
    bool kernel_restarts = true;
    bool detrend = false;
    KernelScope scope = KernelScope::Global;

    static SmootherConfig profile(LossProfile p);
    int delta_max() const { return (window - 1) / 2; }
    void validate() const;
};

std::string profile_name(LossProfile p);
LossProfile parse_profile(const std::string& name);

/// Distance-decaying weights exp(-d/tau) normalised over d = 1..delta_max.
Eigen::VectorXd temporal_weights(int delta_max, double tau);

/// gamma0 (w_m / w_N)^2 for m = 1..floor(L/2).
Eigen::VectorXd frequency_weights(int window, double gamma0);

/// Causal per-vertex paths: raw O (integrated motion) and smoothed S, newest at the back.
struct TrajectoryBuffer
{
    GridSpec spec;
    int window = 7;
    int t = -1;
    Pairsd rest;
    std::deque<Pairsd> raw;
    std::deque<Pairsd> smoothed;

    TrajectoryBuffer() = default;
    TrajectoryBuffer(const GridSpec& spec, int window);

    const Pairsd& latest_raw() const { return raw.back(); }
    /// S_{t-lag} for lag >= 1 while frame t is being smoothed (lag 1 is the newest stored state).
    const Pairsd& past(int lag) const { return smoothed[smoothed.size() - std::size_t(lag)]; }
    int history() const { return int(smoothed.size()); }
};

/// Three causal taps per axis: columns (x1, x2, x3, y1, y2, y3); one row (global) or one row per vertex.
struct KernelSet
{
    KernelScope scope = KernelScope::Global;
    Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor> taps;
    double beta = 0.02;

    static KernelSet zeros(KernelScope scope, Eigen::Index vertices);
    Eigen::Index rows() const { return taps.rows(); }
    /// Taps applying to vertex v.
    auto row(Eigen::Index v) const { return taps.row(scope == KernelScope::Global ? 0 : v); }
};

/// O_t = O_{t-1} + dg (O_0 = rest). Evicts the oldest raw state beyond the window.
void append_and_integrate(TrajectoryBuffer& buf, const GridMotionField& dg);

/// S_t per vertex and axis from the stored smoothed history and the newest raw state.
Pairsd smooth_step(const TrajectoryBuffer& buf, const KernelSet& kernels, double lambda_blend);

/// Smoothed states newest first: window[0] = S_t, window[d] = S_{t-d}.
using StateWindow = std::vector<const Pairsd*>;

StateWindow candidate_window(const TrajectoryBuffer& buf, const Pairsd& candidate);

/// Time-adaptive second-order penalty. `grad` receives dL/dS_t.
double loss_time(const StateWindow& s, const SmootherConfig& cfg, double beta, Pairsd* grad = nullptr,
                 double* dbeta = nullptr);

/// Weighted DFT energy of the window of displacements from rest (zero-padded to L).
double loss_freq(const StateWindow& s, const Pairsd& rest, const SmootherConfig& cfg, Pairsd* grad = nullptr);

/// Edge-length and angle ratios of eight triangles per cell against the rest grid.
double loss_spatial(const GridSpec& spec, const Pairsd& positions, const SmootherConfig& cfg,
                    Pairsd* grad = nullptr);

/// Charbonnier distance between keypoints mapped through the raw cell homography and the smoothed one.
double loss_proj_smooth(const GridSpec& spec, const Pairsd& smoothed, const Pairsd& raw, const MotionSample& m,
                        double eps, Pairsd* grad = nullptr);

struct ObjectiveTerms
{
    double time = 0;
    double freq = 0;
    double spatial = 0;
    double proj = 0;
    double total = 0;
};

/// Smoother objective evaluated at the S_t that `kernels` induce.
ObjectiveTerms smoother_objective(const TrajectoryBuffer& buf, const KernelSet& kernels, const MotionSample& m,
                                  const SmootherConfig& cfg);

/// Objective and its gradient with respect to the taps (and beta when optimised).
double smoother_objective_grad(const TrajectoryBuffer& buf, const KernelSet& kernels, const MotionSample& m,
                               const SmootherConfig& cfg, KernelSet& grad);

/// Projected gradient descent over the taps starting from `init` (plus the restarts when enabled).
KernelSet solve_kernels(const TrajectoryBuffer& buf, const MotionSample& m, const SmootherConfig& cfg,
                        const KernelSet& init);

struct SmoothedFrame
{
    Pairsd smoothed;
    Pairsd raw;
    KernelSet kernels;
};

/// Stateful online smoother: integrate, solve the taps, smooth, push.
class TrajectorySmoother
{
public:
    TrajectorySmoother(const GridSpec& spec, const SmootherConfig& cfg);

    SmoothedFrame step(const GridMotionField& dg, const MotionSample& m);

    const TrajectoryBuffer& buffer() const { return buf_; }
    const SmootherConfig& config() const { return cfg_; }

private:
    SmootherConfig cfg_;
    TrajectoryBuffer buf_;
    KernelSet kernels_;
};

/// `frame,row,col,ox,oy,sx,sy` per vertex.
void write_trajectory_dump(std::ostream& out, int frame, const GridSpec& spec, const Pairsd& raw,
                           const Pairsd& smoothed);

}  // namespace causalstab
