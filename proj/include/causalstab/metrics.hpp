#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "causalstab/observer.hpp"

namespace causalstab
{

/// Per-frame homographies with validity flags.
struct FrameTransformSeries
{
    std::vector<Homography> h;
    std::vector<bool> valid;

    std::size_t size() const { return h.size(); }
    int valid_count() const;
    void push(const std::optional<Homography>& t);
};

enum class StabilityBand
{
    /// First five non-DC bins (1..5).
    FirstFive,
    /// Bins 2..6.
    TwoToSix,
};

struct MetricsConfig
{
    ObserverConfig observer;
    RansacConfig ransac;
    int min_matches = 8;
    StabilityBand band = StabilityBand::FirstFive;

    void validate() const;
};

std::string band_name(StabilityBand b);
StabilityBand parse_band(const std::string& name);

/// Homography mapping points of `a` onto `b` (builtin detector, LK, RANSAC); nullopt without consensus.
std::optional<Homography> estimate_pair_transform(const Frame& a, const Frame& b, const MetricsConfig& cfg);

/// Input -> output transform per frame. Throws DimensionMismatch or AllFramesInvalid.
FrameTransformSeries estimate_frame_transforms(const std::vector<Frame>& input, const std::vector<Frame>& output,
                                               const MetricsConfig& cfg);

/// Frame t-1 -> frame t transform for t >= 1; entry 0 is the identity.
FrameTransformSeries estimate_motion_series(const std::vector<Frame>& frames, const MetricsConfig& cfg);

/// Preserved field-of-view ratio of one frame: the smaller of the width and height ratios of the
/// interior box of the projected corners, taken in both mapping directions and clamped to [0, 1].
double frame_crop_ratio(const Homography& h, int width, int height);
double cropping_ratio(const FrameTransformSeries& s, int width, int height);

/// sigma_min / sigma_max of the upper-left 2x2 block after normalising m(2,2) to 1.
double frame_distortion(const Homography& h);
double distortion_value(const FrameTransformSeries& s);

/// Low-band energy share of one signal over the one-sided non-DC spectrum; 1 when that energy is zero.
double low_band_ratio(const std::vector<double>& signal, StabilityBand band = StabilityBand::FirstFive);

struct TrajectorySignals
{
    std::vector<double> tx;
    std::vector<double> ty;
    std::vector<double> rotation;
};

/// Accumulates relative transforms (invalid ones count as identity) into translation and rotation signals.
TrajectorySignals accumulate_trajectory(const FrameTransformSeries& relative);

/// Minimum low-band ratio over tx, ty and rotation. Throws TooShort below 12 valid frames.
double stability_score(const FrameTransformSeries& relative, StabilityBand band = StabilityBand::FirstFive);

/// +infinity for identical frames.
double psnr(const Frame& reference, const Frame& test);

struct MetricsReport
{
    double cropping = 0;
    double distortion = 0;
    double stability = 0;
    /// Mean over frames with finite PSNR; +infinity when every frame is identical.
    double psnr_mean = 0;
    std::vector<double> crop_t;
    std::vector<double> distortion_t;
    std::vector<double> psnr_t;
    std::vector<bool> valid;
    TrajectorySignals trajectory;
};

/// C and D from input -> output transforms, S from the output's own frame-to-frame motion.
MetricsReport compute_metrics(const std::vector<Frame>& input, const std::vector<Frame>& output,
                              const MetricsConfig& cfg);

std::string metrics_to_json(const MetricsReport& r, int indent = 2);

/// `frame,Ct,Dt,psnr` rows; invalid frames leave Ct and Dt empty.
void write_metrics_csv(std::ostream& out, const MetricsReport& r);

/// `bin,tx,ty,rotation` power spectrum rows of the trajectory signals (DC removed).
void write_spectrum_csv(std::ostream& out, const TrajectorySignals& s);

}  // namespace causalstab
