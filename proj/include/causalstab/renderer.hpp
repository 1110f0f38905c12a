#pragma once

#include <deque>
#include <string>
#include <vector>

#include "causalstab/image.hpp"
#include "causalstab/propagation.hpp"

namespace causalstab
{

/// M_t = S_t - O_t on the grid vertices.
struct CompensationField
{
    GridSpec spec;
    Field2d vectors;

    CompensationField() = default;
    explicit CompensationField(const GridSpec& s) : spec(s), vectors(s.rows, s.cols) {}

    Vec2 at(const Point2& pixel) const { return bilinear_sample(vectors, spec.to_lattice(pixel)); }
};

struct BorderReport
{
    double b_hor = 0;
    double b_ver = 0;
    double crop_ratio = 1;
    double scale_w = 1;
    double scale_h = 1;
    double scale_iso = 1;

    /// Fills ratio and scale factors from per-side borders of a width x height frame.
    static BorderReport from_borders(double b_hor, double b_ver, int width, int height);
};

enum class BorderPolicy
{
    CropZoom,
    /// Leave replicated borders visible.
    None,
};

std::string border_policy_name(BorderPolicy p);
BorderPolicy parse_border_policy(const std::string& name);

CompensationField compensation_field(const GridSpec& spec, const Pairsd& smoothed, const Pairsd& raw);

/// Backward warp: out(x) = in(x - M(x)).
std::vector<Planed> warp_planes(const std::vector<Planed>& planes, const CompensationField& m);
Frame warp_frame(const Frame& frame, const CompensationField& m);

/// Largest inward excursion of the warped frame boundary per axis (per side, both sides share the max).
BorderReport measure_borders(const CompensationField& m, int width, int height);

/// Central (W/s, H/s) crop resampled back to W x H. Pixel centres are aligned.
std::vector<Planed> crop_zoom_planes(const std::vector<Planed>& planes, double s);
Frame apply_crop_zoom(const Frame& frame, const BorderReport& report);

/// Running per-axis maximum of the borders over the last `window` frames.
class BorderAccumulator
{
public:
    BorderAccumulator(int width, int height, int window = 30);

    BorderReport push(const BorderReport& frame_report);
    BorderReport current() const;

private:
    int width_;
    int height_;
    int window_;
    std::deque<std::pair<double, double>> recent_;
};

struct RenderConfig
{
    BorderPolicy policy = BorderPolicy::CropZoom;
    int border_window = 30;

    void validate() const;
};

/// Stage-3 renderer: warp by S_t - O_t, then crop and zoom by the accumulated borders.
class Compensator
{
public:
    Compensator(const GridSpec& spec, const RenderConfig& cfg);

    Frame render(const Frame& frame, const Pairsd& smoothed, const Pairsd& raw);
    const BorderReport& last_report() const { return last_; }

private:
    GridSpec spec_;
    RenderConfig cfg_;
    BorderAccumulator borders_;
    BorderReport last_;
};

}  // namespace causalstab
