#include "causalstab/metrics.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/SVD>
#include <json.hpp>

namespace causalstab
{

int FrameTransformSeries::valid_count() const
{
    return int(std::count(valid.begin(), valid.end(), true));
}

void FrameTransformSeries::push(const std::optional<Homography>& t)
{
    h.push_back(t.value_or(Homography::identity()));
    valid.push_back(t.has_value());
}

void MetricsConfig::validate() const
{
    observer.validate();
    ransac.validate();
    if (min_matches < 4)
        throw Error(Errc::ConfigError, "metrics.min_matches: must be >= 4");
}

std::string band_name(StabilityBand b)
{
    return b == StabilityBand::FirstFive ? "1-5" : "2-6";
}

StabilityBand parse_band(const std::string& name)
{
    if (name == "1-5")
        return StabilityBand::FirstFive;
    if (name == "2-6")
        return StabilityBand::TwoToSix;
    throw Error(Errc::ConfigError, "metrics.band: expected 1-5 or 2-6, got '" + name + "'");
}

std::optional<Homography> estimate_pair_transform(const Frame& a, const Frame& b, const MetricsConfig& cfg)
{
    if (a.width != b.width || a.height != b.height)
        throw Error(Errc::DimensionMismatch, "frame pair differs in size");
    const KeypointSet pts = homogenize(detect_keypoints(a, Detector::ShiTomasi, cfg.observer), cfg.observer);
    if (int(pts.points.size()) < cfg.min_matches)
        return std::nullopt;
    const LkPyramid pa(to_gray(a), cfg.observer.pyramid_levels);
    const LkPyramid pb(to_gray(b), cfg.observer.pyramid_levels);
    const LkParams lk{cfg.observer.lk_window, cfg.observer.lk_iterations};
    std::vector<Correspondence> corrs;
    for (const auto& p : pts.points)
    {
        const auto q = lk_track(pa, pb, p.pos(), Vec2::Zero(), lk);
        if (!q)
            continue;
        const auto back = lk_track(pb, pa, *q, p.pos() - *q, lk);
        if (!back || (*back - p.pos()).norm() > 1.0)
            continue;
        corrs.push_back({p.pos(), *q, 1.0});
    }
    if (int(corrs.size()) < cfg.min_matches)
        return std::nullopt;
    try
    {
        return estimate_homography_ransac(corrs, cfg.ransac).h;
    }
    catch (const Error& e)
    {
        if (e.code() == Errc::NoConsensus || e.code() == Errc::DegenerateConfiguration ||
            e.code() == Errc::TooFewPoints)
            return std::nullopt;
        throw;
    }
}

FrameTransformSeries estimate_frame_transforms(const std::vector<Frame>& input, const std::vector<Frame>& output,
                                               const MetricsConfig& cfg)
{
    if (input.size() != output.size())
        throw Error(Errc::DimensionMismatch, "input has " + std::to_string(input.size()) + " frames, output has " +
                                                 std::to_string(output.size()));
    FrameTransformSeries s;
    for (std::size_t i = 0; i < input.size(); ++i)
        s.push(estimate_pair_transform(input[i], output[i], cfg));
    if (s.valid_count() == 0)
        throw Error(Errc::AllFramesInvalid, "no frame pair produced a homography");
    return s;
}

FrameTransformSeries estimate_motion_series(const std::vector<Frame>& frames, const MetricsConfig& cfg)
{
    FrameTransformSeries s;
    if (frames.empty())
        return s;
    s.push(Homography::identity());
    for (std::size_t i = 1; i < frames.size(); ++i)
        s.push(estimate_pair_transform(frames[i - 1], frames[i], cfg));
    return s;
}

namespace
{

// Width and height shares of the frame covered by the interior box of `h` applied to the corners.
double interior_ratio(const Homography& h, int width, int height)
{
    const double W = width, H = height;
    Point2 c[4];
    try
    {
        c[0] = project(h, Point2(0, 0));
        c[1] = project(h, Point2(W, 0));
        c[2] = project(h, Point2(W, H));
        c[3] = project(h, Point2(0, H));
    }
    catch (const Error&)
    {
        return 0.0;
    }
    const double left = std::max({c[0].x(), c[3].x(), 0.0});
    const double right = std::min({c[1].x(), c[2].x(), W});
    const double top = std::max({c[0].y(), c[1].y(), 0.0});
    const double bottom = std::min({c[2].y(), c[3].y(), H});
    const double wr = std::clamp((right - left) / W, 0.0, 1.0);
    const double hr = std::clamp((bottom - top) / H, 0.0, 1.0);
    return std::min(wr, hr);
}

}  // namespace

double frame_crop_ratio(const Homography& h, int width, int height)
{
    return std::min(interior_ratio(h, width, height), interior_ratio(h.inverse(), width, height));
}

double cropping_ratio(const FrameTransformSeries& s, int width, int height)
{
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.valid[i])
        {
            sum += frame_crop_ratio(s.h[i], width, height);
            ++n;
        }
    if (n == 0)
        throw Error(Errc::AllFramesInvalid, "no valid frame for the cropping ratio");
    return sum / n;
}

double frame_distortion(const Homography& h)
{
    Eigen::Matrix3d m = h.m;
    if (std::abs(m(2, 2)) > 1e-12)
        m /= m(2, 2);
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(m.topLeftCorner<2, 2>());
    const auto sv = svd.singularValues();
    return sv(0) > 0 ? sv(1) / sv(0) : 0.0;
}

double distortion_value(const FrameTransformSeries& s)
{
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.valid[i])
            d = std::min(d, frame_distortion(s.h[i]));
    if (!std::isfinite(d))
        throw Error(Errc::AllFramesInvalid, "no valid frame for the distortion value");
    return d;
}

namespace
{

std::vector<double> power_spectrum(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    std::vector<double> p(n / 2 + 1, 0.0);
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        std::complex<double> acc = 0;
        for (std::size_t t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / double(n));
        p[k] = std::norm(acc);
    }
    return p;
}

}  // namespace

double low_band_ratio(const std::vector<double>& signal, StabilityBand band)
{
    const auto p = power_spectrum(signal);
    const std::size_t lo = band == StabilityBand::FirstFive ? 1 : 2;
    double low = 0, total = 0;
    for (std::size_t k = 1; k < p.size(); ++k)
    {
        total += p[k];
        if (k >= lo && k < lo + 5)
            low += p[k];
    }
    // Rounding noise on a still trajectory is not energy.
    double scale = 0;
    for (double v : signal)
        scale = std::max(scale, std::abs(v));
    if (total <= 1e-20 * std::max(1.0, scale * scale) * double(signal.size()))
        return 1.0;
    return low / total;
}

TrajectorySignals accumulate_trajectory(const FrameTransformSeries& relative)
{
    TrajectorySignals s;
    Eigen::Matrix3d acc = Eigen::Matrix3d::Identity();
    for (std::size_t i = 0; i < relative.size(); ++i)
    {
        if (relative.valid[i])
        {
            acc = relative.h[i].m * acc;
            if (std::abs(acc(2, 2)) > 1e-12)
                acc /= acc(2, 2);
        }
        s.tx.push_back(acc(0, 2));
        s.ty.push_back(acc(1, 2));
        s.rotation.push_back(std::atan2(acc(1, 0), acc(0, 0)));
    }
    return s;
}

double stability_score(const FrameTransformSeries& relative, StabilityBand band)
{
    if (relative.valid_count() < 12)
        throw Error(Errc::TooShort, "stability needs at least 12 valid frames");
    const TrajectorySignals s = accumulate_trajectory(relative);
    return std::min({low_band_ratio(s.tx, band), low_band_ratio(s.ty, band), low_band_ratio(s.rotation, band)});
}

double psnr(const Frame& reference, const Frame& test)
{
    if (reference.width != test.width || reference.height != test.height || reference.channels != test.channels ||
        reference.data.size() != test.data.size())
        throw Error(Errc::DimensionMismatch, "PSNR needs frames of equal shape");
    if (reference.data.empty())
        throw Error(Errc::EmptyFrame, "PSNR of an empty frame");
    double sse = 0;
    for (std::size_t i = 0; i < reference.data.size(); ++i)
    {
        const double d = double(reference.data[i]) - double(test.data[i]);
        sse += d * d;
    }
    const double mse = sse / double(reference.data.size());
    if (mse == 0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

MetricsReport compute_metrics(const std::vector<Frame>& input, const std::vector<Frame>& output,
                              const MetricsConfig& cfg)
{
    cfg.validate();
    MetricsReport r;
    const FrameTransformSeries series = estimate_frame_transforms(input, output, cfg);
    const int w = input.front().width, h = input.front().height;
    r.cropping = cropping_ratio(series, w, h);
    r.distortion = distortion_value(series);
    r.valid = series.valid;
    double psum = 0;
    int pn = 0;
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        r.crop_t.push_back(series.valid[i] ? frame_crop_ratio(series.h[i], w, h) : 0.0);
        r.distortion_t.push_back(series.valid[i] ? frame_distortion(series.h[i]) : 0.0);
        r.psnr_t.push_back(psnr(input[i], output[i]));
        if (std::isfinite(r.psnr_t.back()))
        {
            psum += r.psnr_t.back();
            ++pn;
        }
    }
    r.psnr_mean = pn > 0 ? psum / pn : std::numeric_limits<double>::infinity();
    const FrameTransformSeries motion = estimate_motion_series(output, cfg);
    r.trajectory = accumulate_trajectory(motion);
    r.stability = stability_score(motion, cfg.band);
    return r;
}

namespace
{

nlohmann::json number_or_inf(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& r, int indent)
{
    nlohmann::ordered_json j;
    j["cropping"] = r.cropping;
    j["distortion"] = r.distortion;
    j["stability"] = r.stability;
    j["psnr_mean"] = number_or_inf(r.psnr_mean);
    j["frames"] = r.valid.size();
    j["valid_frames"] = std::count(r.valid.begin(), r.valid.end(), true);
    return j.dump(indent);
}

void write_metrics_csv(std::ostream& out, const MetricsReport& r)
{
    out << "frame,Ct,Dt,psnr\n";
    for (std::size_t i = 0; i < r.valid.size(); ++i)
    {
        out << i << ',';
        if (r.valid[i])
            out << r.crop_t[i] << ',' << r.distortion_t[i];
        else
            out << ',';
        out << ',';
        if (std::isinf(r.psnr_t[i]))
            out << "inf";
        else
            out << r.psnr_t[i];
        out << '\n';
    }
}

void write_spectrum_csv(std::ostream& out, const TrajectorySignals& s)
{
    const auto px = power_spectrum(s.tx), py = power_spectrum(s.ty), pr = power_spectrum(s.rotation);
    out << "bin,tx,ty,rotation\n";
    for (std::size_t k = 1; k < px.size(); ++k)
        out << k << ',' << px[k] << ',' << py[k] << ',' << pr[k] << '\n';
}

}  // namespace causalstab
