#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "causalstab/image.hpp"

namespace causalstab
{

/// Reads 8-bit PGM/PPM (binary or ASCII) or PNG. Throws IoError.
Frame read_image(const std::filesystem::path& path, int index = 0);

/// Format chosen by extension: .pgm, .ppm or .png.
void write_image(const std::filesystem::path& path, const Frame& frame);

/// Numbered image files (png/pgm/ppm) in a directory, ordered by the trailing number in the stem.
std::vector<std::filesystem::path> list_sequence(const std::filesystem::path& dir);

/// Sequential reader for a headerless planar gray8 stream.
class RawStreamReader
{
public:
    RawStreamReader(const std::filesystem::path& path, int width, int height);
    std::optional<Frame> next();

private:
    std::ifstream in_;
    int width_;
    int height_;
    int index_ = 0;
};

void append_raw(std::ofstream& out, const Frame& frame);

}  // namespace causalstab
