#include "causalstab/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace causalstab
{

BorderReport BorderReport::from_borders(double b_hor, double b_ver, int width, int height)
{
    BorderReport r;
    // Keep at least one pixel of content on each axis.
    r.b_hor = std::clamp(b_hor, 0.0, std::max(0.0, (width - 1) / 2.0));
    r.b_ver = std::clamp(b_ver, 0.0, std::max(0.0, (height - 1) / 2.0));
    const double wc = width - 2 * r.b_hor, hc = height - 2 * r.b_ver;
    r.crop_ratio = (wc * hc) / (double(width) * height);
    r.scale_w = width / wc;
    r.scale_h = height / hc;
    r.scale_iso = std::max(r.scale_w, r.scale_h);
    return r;
}

std::string border_policy_name(BorderPolicy p)
{
    return p == BorderPolicy::CropZoom ? "crop-zoom" : "no-crop";
}

BorderPolicy parse_border_policy(const std::string& name)
{
    if (name == "crop-zoom" || name == "crop")
        return BorderPolicy::CropZoom;
    if (name == "no-crop" || name == "none")
        return BorderPolicy::None;
    throw Error(Errc::ConfigError, "render.border_policy: expected crop-zoom or no-crop, got '" + name + "'");
}

CompensationField compensation_field(const GridSpec& spec, const Pairsd& smoothed, const Pairsd& raw)
{
    if (smoothed.rows() != spec.size() || raw.rows() != spec.size())
        throw Error(Errc::SpecMismatch, "trajectory states do not match the grid");
    CompensationField m(spec);
    m.vectors.data = smoothed - raw;
    return m;
}

std::vector<Planed> warp_planes(const std::vector<Planed>& planes, const CompensationField& m)
{
    std::vector<Planed> out;
    if (planes.empty())
        return out;
    const Eigen::Index h = planes[0].rows(), w = planes[0].cols();
    if (w != m.spec.frame_width || h != m.spec.frame_height)
        throw Error(Errc::DimensionMismatch, "compensation grid does not cover the frame");
    out.assign(planes.size(), Planed(h, w));
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x)
        {
            const Vec2 d = m.at({double(x), double(y)});
            const double sx = double(x) - d.x(), sy = double(y) - d.y();
            for (std::size_t c = 0; c < planes.size(); ++c)
                out[c](y, x) = sample_plane(planes[c], sx, sy);
        }
    return out;
}

Frame warp_frame(const Frame& frame, const CompensationField& m)
{
    frame.validate();
    return from_planes(warp_planes(to_planes(frame), m), frame.index);
}

BorderReport measure_borders(const CompensationField& m, int width, int height)
{
    const GridSpec& g = m.spec;
    double left = 0, right = 0, top = 0, bottom = 0;
    for (int r = 0; r < g.rows; ++r)
    {
        left = std::max(left, m.vectors.at(r, 0)(0));
        right = std::max(right, -m.vectors.at(r, g.cols - 1)(0));
    }
    for (int c = 0; c < g.cols; ++c)
    {
        top = std::max(top, m.vectors.at(0, c)(1));
        bottom = std::max(bottom, -m.vectors.at(g.rows - 1, c)(1));
    }
    return BorderReport::from_borders(std::max(left, right), std::max(top, bottom), width, height);
}

std::vector<Planed> crop_zoom_planes(const std::vector<Planed>& planes, double s)
{
    if (!(s >= 1.0))
        throw Error(Errc::InvalidArgument, "zoom factor must be >= 1");
    if (s == 1.0)
        return planes;
    std::vector<Planed> out;
    for (const auto& p : planes)
    {
        const Eigen::Index h = p.rows(), w = p.cols();
        const double ox = (w - w / s) / 2.0, oy = (h - h / s) / 2.0;
        Planed o(h, w);
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x)
                o(y, x) = sample_plane(p, ox + (double(x) + 0.5) / s - 0.5, oy + (double(y) + 0.5) / s - 0.5);
        out.push_back(std::move(o));
    }
    return out;
}

Frame apply_crop_zoom(const Frame& frame, const BorderReport& report)
{
    if (report.scale_iso == 1.0)
        return frame;
    frame.validate();
    return from_planes(crop_zoom_planes(to_planes(frame), report.scale_iso), frame.index);
}

BorderAccumulator::BorderAccumulator(int width, int height, int window) : width_(width), height_(height), window_(window)
{
    if (window < 1)
        throw Error(Errc::ConfigError, "border window must be >= 1");
}

BorderReport BorderAccumulator::push(const BorderReport& frame_report)
{
    recent_.emplace_back(frame_report.b_hor, frame_report.b_ver);
    while (int(recent_.size()) > window_)
        recent_.pop_front();
    return current();
}

BorderReport BorderAccumulator::current() const
{
    double bh = 0, bv = 0;
    for (const auto& [h, v] : recent_)
    {
        bh = std::max(bh, h);
        bv = std::max(bv, v);
    }
    return BorderReport::from_borders(bh, bv, width_, height_);
}

void RenderConfig::validate() const
{
    if (border_window < 1)
        throw Error(Errc::ConfigError, "render.border_window: must be >= 1");
}

Compensator::Compensator(const GridSpec& spec, const RenderConfig& cfg)
    : spec_(spec), cfg_(cfg), borders_(spec.frame_width, spec.frame_height, cfg.border_window)
{
    cfg.validate();
}

Frame Compensator::render(const Frame& frame, const Pairsd& smoothed, const Pairsd& raw)
{
    const CompensationField m = compensation_field(spec_, smoothed, raw);
    std::vector<Planed> planes = warp_planes(to_planes(frame), m);
    last_ = borders_.push(measure_borders(m, spec_.frame_width, spec_.frame_height));
    if (cfg_.policy == BorderPolicy::CropZoom)
        planes = crop_zoom_planes(planes, last_.scale_iso);
    return from_planes(planes, frame.index);
}

}  // namespace causalstab
