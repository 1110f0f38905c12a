#include "causalstab/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <sstream>

#include <png.h>

namespace causalstab
{

namespace fs = std::filesystem;

namespace
{

std::string lower_ext(const fs::path& p)
{
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return e;
}

// Skips whitespace and '#' comments in a netpbm header.
int read_header_int(std::istream& in)
{
    for (;;)
    {
        int c = in.peek();
        if (c == '#')
        {
            std::string line;
            std::getline(in, line);
        }
        else if (std::isspace(c))
            in.get();
        else
            break;
    }
    int v = -1;
    in >> v;
    if (!in)
        throw Error(Errc::IoError, "malformed netpbm header");
    return v;
}

Frame read_netpbm(const fs::path& path, int index)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::IoError, "cannot open " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '2' && magic[1] != '3' && magic[1] != '5' && magic[1] != '6'))
        throw Error(Errc::IoError, "not a PGM/PPM file: " + path.string());
    const bool ascii = magic[1] == '2' || magic[1] == '3';
    const int channels = (magic[1] == '3' || magic[1] == '6') ? 3 : 1;
    const int w = read_header_int(in);
    const int h = read_header_int(in);
    const int maxval = read_header_int(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw Error(Errc::IoError, "unsupported netpbm geometry or depth in " + path.string());
    Frame f(index, w, h, channels);
    if (ascii)
    {
        for (auto& px : f.data)
            px = std::uint8_t(read_header_int(in));
    }
    else
    {
        in.get();
        in.read(reinterpret_cast<char*>(f.data.data()), std::streamsize(f.data.size()));
        if (!in)
            throw Error(Errc::IoError, "truncated pixel data in " + path.string());
    }
    return f;
}

void write_netpbm(const fs::path& path, const Frame& f)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(Errc::IoError, "cannot write " + path.string());
    out << (f.channels == 3 ? "P6\n" : "P5\n") << f.width << ' ' << f.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(f.data.data()), std::streamsize(f.data.size()));
    if (!out)
        throw Error(Errc::IoError, "write failed for " + path.string());
}

Frame read_png(const fs::path& path, int index)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str()))
        throw Error(Errc::IoError, "cannot read PNG " + path.string() + ": " + img.message);
    const int channels = (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
    img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Frame f(index, int(img.width), int(img.height), channels);
    if (!png_image_finish_read(&img, nullptr, f.data.data(), 0, nullptr))
    {
        png_image_free(&img);
        throw Error(Errc::IoError, "cannot decode PNG " + path.string() + ": " + img.message);
    }
    return f;
}

void write_png(const fs::path& path, const Frame& f)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = png_uint_32(f.width);
    img.height = png_uint_32(f.height);
    img.format = f.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, f.data.data(), 0, nullptr))
        throw Error(Errc::IoError, "cannot write PNG " + path.string() + ": " + img.message);
}

}  // namespace

Frame read_image(const fs::path& path, int index)
{
    const std::string ext = lower_ext(path);
    if (ext == ".png")
        return read_png(path, index);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
        return read_netpbm(path, index);
    throw Error(Errc::IoError, "unsupported image extension: " + path.string());
}

void write_image(const fs::path& path, const Frame& frame)
{
    frame.validate();
    const std::string ext = lower_ext(path);
    if (ext == ".png")
        write_png(path, frame);
    else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
        write_netpbm(path, frame);
    else
        throw Error(Errc::IoError, "unsupported image extension: " + path.string());
}

std::vector<fs::path> list_sequence(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw Error(Errc::IoError, "not a directory: " + dir.string());

    struct Entry
    {
        long number;
        fs::path path;
    };
    std::vector<Entry> entries;
    for (const auto& de : fs::directory_iterator(dir))
    {
        if (!de.is_regular_file())
            continue;
        const std::string ext = lower_ext(de.path());
        if (ext != ".png" && ext != ".pgm" && ext != ".ppm")
            continue;
        const std::string stem = de.path().stem().string();
        auto end = stem.find_last_of("0123456789");
        if (end == std::string::npos)
            continue;
        auto begin = stem.find_last_not_of("0123456789", end);
        begin = begin == std::string::npos ? 0 : begin + 1;
        entries.push_back({std::stol(stem.substr(begin, end - begin + 1)), de.path()});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.number != b.number ? a.number < b.number : a.path < b.path;
    });
    std::vector<fs::path> out;
    for (auto& e : entries)
        out.push_back(std::move(e.path));
    return out;
}

RawStreamReader::RawStreamReader(const fs::path& path, int width, int height)
    : in_(path, std::ios::binary), width_(width), height_(height)
{
    if (!in_)
        throw Error(Errc::IoError, "cannot open raw stream " + path.string());
    if (width <= 0 || height <= 0)
        throw Error(Errc::ConfigError, "raw stream needs positive io.raw_width and io.raw_height");
}

std::optional<Frame> RawStreamReader::next()
{
    Frame f(index_, width_, height_, 1);
    in_.read(reinterpret_cast<char*>(f.data.data()), std::streamsize(f.data.size()));
    if (in_.gcount() == 0)
        return std::nullopt;
    if (std::size_t(in_.gcount()) != f.data.size())
        throw Error(Errc::IoError, "raw stream ends mid-frame");
    ++index_;
    return f;
}

void append_raw(std::ofstream& out, const Frame& frame)
{
    if (frame.channels != 1)
        throw Error(Errc::IoError, "raw output is gray8 only");
    out.write(reinterpret_cast<const char*>(frame.data.data()), std::streamsize(frame.data.size()));
    if (!out)
        throw Error(Errc::IoError, "raw stream write failed");
}

}  // namespace causalstab
