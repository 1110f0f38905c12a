#include "causalstab/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace causalstab
{

void Frame::validate() const
{
    if (empty())
        throw Error(Errc::EmptyFrame, "frame " + std::to_string(index) + " has no pixels");
    if (channels != 1 && channels != 3)
        throw Error(Errc::DimensionMismatch, "frame must have 1 or 3 channels");
    if (data.size() != std::size_t(width) * height * channels)
        throw Error(Errc::DimensionMismatch, "frame data length does not match width*height*channels");
}

Planef to_gray(const Frame& frame)
{
    frame.validate();
    Planef out(frame.height, frame.width);
    const float k = 1.0f / 255.0f;
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x)
        {
            if (frame.channels == 1)
                out(y, x) = frame.at(x, y) * k;
            else
                out(y, x) = (0.299f * frame.at(x, y, 0) + 0.587f * frame.at(x, y, 1) + 0.114f * frame.at(x, y, 2)) * k;
        }
    return out;
}

std::vector<Planed> to_planes(const Frame& frame)
{
    frame.validate();
    std::vector<Planed> planes(frame.channels, Planed(frame.height, frame.width));
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x)
            for (int c = 0; c < frame.channels; ++c)
                planes[c](y, x) = frame.at(x, y, c);
    return planes;
}

Frame from_planes(const std::vector<Planed>& planes, int index)
{
    Frame f(index, int(planes.front().cols()), int(planes.front().rows()), int(planes.size()));
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            for (int c = 0; c < f.channels; ++c)
                f.at(x, y, c) = std::uint8_t(std::clamp(std::lround(planes[c](y, x)), 0L, 255L));
    return f;
}

namespace
{

Planef downsample(const Planef& src)
{
    static constexpr float k[5] = {1 / 16.f, 4 / 16.f, 6 / 16.f, 4 / 16.f, 1 / 16.f};
    const int h = int(src.rows()), w = int(src.cols());
    Planef tmp(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
        {
            float acc = 0;
            for (int i = -2; i <= 2; ++i)
                acc += k[i + 2] * src(y, std::clamp(x + i, 0, w - 1));
            tmp(y, x) = acc;
        }
    const int h2 = (h + 1) / 2, w2 = (w + 1) / 2;
    Planef out(h2, w2);
    for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x)
        {
            float acc = 0;
            for (int i = -2; i <= 2; ++i)
                acc += k[i + 2] * tmp(std::clamp(2 * y + i, 0, h - 1), 2 * x);
            out(y, x) = acc;
        }
    return out;
}

}  // namespace

std::vector<Planef> build_pyramid(const Planef& base, int levels)
{
    std::vector<Planef> pyr{base};
    for (int l = 1; l < levels; ++l)
    {
        if (pyr.back().rows() < 16 || pyr.back().cols() < 16)
            break;
        pyr.push_back(downsample(pyr.back()));
    }
    return pyr;
}

void image_gradients(const Planef& img, Planef& gx, Planef& gy)
{
    const int h = int(img.rows()), w = int(img.cols());
    gx.resize(h, w);
    gy.resize(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
        {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
            gx(y, x) = 0.5f * (img(y, xp) - img(y, xm));
            gy(y, x) = 0.5f * (img(yp, x) - img(ym, x));
        }
}

}  // namespace causalstab
