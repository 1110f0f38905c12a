#pragma once

#include <cstdint>
#include <vector>

#include "causalstab/common.hpp"

namespace causalstab
{

/// One video frame: row-major interleaved 8-bit samples.
struct Frame
{
    int index = 0;
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    Frame() = default;
    Frame(int idx, int w, int h, int c) : index(idx), width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0) {}

    bool empty() const { return width <= 0 || height <= 0 || data.empty(); }
    std::uint8_t& at(int x, int y, int c = 0) { return data[(std::size_t(y) * width + x) * channels + c]; }
    std::uint8_t at(int x, int y, int c = 0) const { return data[(std::size_t(y) * width + x) * channels + c]; }

    /// Throws EmptyFrame / DimensionMismatch on malformed frames.
    void validate() const;
};

/// Luma in [0, 1] (Rec.601 weights for RGB).
Planef to_gray(const Frame& frame);

/// One plane per channel in [0, 255].
std::vector<Planed> to_planes(const Frame& frame);

/// Rounds and clamps planes back to 8 bit.
Frame from_planes(const std::vector<Planed>& planes, int index);

/// Gaussian pyramid, level 0 is the input; each level halves resolution.
std::vector<Planef> build_pyramid(const Planef& base, int levels);

/// Central-difference image gradients.
void image_gradients(const Planef& img, Planef& gx, Planef& gy);

}  // namespace causalstab
