#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "causalstab/image.hpp"

namespace causalstab::fixtures
{

// Smooth analytic texture sampled at (x - sx, y - sy); shifts are exact at any offset.
struct Texture
{
    struct Wave
    {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;

    explicit Texture(unsigned seed, int n = 12)
    {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> f(0.04, 0.22), ph(0, 6.283185307179586), a(10, 22);
        std::bernoulli_distribution sgn(0.5);
        for (int i = 0; i < n; ++i)
            waves.push_back({sgn(rng) ? f(rng) : -f(rng), sgn(rng) ? f(rng) : -f(rng), ph(rng), a(rng)});
    }

    double operator()(double x, double y) const
    {
        double v = 128;
        for (const auto& w : waves)
            v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
        return v;
    }

    Frame render(int index, int w, int h, double sx = 0, double sy = 0) const
    {
        Frame f(index, w, h, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                f.at(x, y) = std::uint8_t(std::clamp(std::lround((*this)(x - sx, y - sy)), 0L, 255L));
        return f;
    }
};

inline Frame filled(int w, int h, std::uint8_t v, int channels = 1)
{
    Frame f(0, w, h, channels);
    std::fill(f.data.begin(), f.data.end(), v);
    return f;
}

}  // namespace causalstab::fixtures
