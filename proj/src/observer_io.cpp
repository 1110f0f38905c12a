#include "causalstab/observer_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace causalstab
{

namespace fs = std::filesystem;

FlowField read_flo(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::IoError, "cannot open " + path.string());
    char magic[4];
    std::int32_t w = 0, h = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || std::memcmp(magic, "PIEH", 4) != 0)
        throw Error(Errc::IoError, "not a .flo file: " + path.string());
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
        throw Error(Errc::IoError, "bad .flo dimensions in " + path.string());
    FlowField f(h, w);
    std::vector<float> buf(std::size_t(w) * h * 2);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    if (!in)
        throw Error(Errc::IoError, "truncated .flo file: " + path.string());
    for (std::size_t i = 0; i < std::size_t(w) * h; ++i)
    {
        f.data(Eigen::Index(i), 0) = buf[2 * i];
        f.data(Eigen::Index(i), 1) = buf[2 * i + 1];
    }
    return f;
}

void write_flo(const fs::path& path, const FlowField& flow)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(Errc::IoError, "cannot write " + path.string());
    const std::int32_t w = flow.cols, h = flow.rows;
    out.write("PIEH", 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    // Row-major N x 2 storage is already interleaved.
    out.write(reinterpret_cast<const char*>(flow.data.data()), std::streamsize(flow.data.size() * sizeof(float)));
    if (!out)
        throw Error(Errc::IoError, "write failed for " + path.string());
}

ImportedKeypoints read_keypoint_csv(const fs::path& path, int width, int height)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::IoError, "cannot open " + path.string());

    std::map<int, std::map<std::string, KeypointSet>> grouped;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        if (lineno == 1 && !fields.empty() && fields[0] == "frame_index")
            continue;
        if (fields.size() != 5)
            throw Error(Errc::IoError, path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
        try
        {
            const int frame = std::stoi(fields[0]);
            ScoredKeypoint kp{std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]), fields[4]};
            if (kp.detector_id.empty())
                throw std::invalid_argument("empty detector id");
            auto& set = grouped[frame][kp.detector_id];
            set.frame_index = frame;
            set.width = width;
            set.height = height;
            set.points.push_back(std::move(kp));
        }
        catch (const std::logic_error&)
        {
            throw Error(Errc::IoError, path.string() + ":" + std::to_string(lineno) + ": malformed keypoint row");
        }
    }

    ImportedKeypoints out;
    for (auto& [frame, by_detector] : grouped)
        for (auto& [id, set] : by_detector)
        {
            double top = 0;
            for (const auto& p : set.points)
                top = std::max(top, p.score);
            for (auto& p : set.points)
                p.score = top > 0 ? std::max(p.score, 0.0) / top : 0.0;
            out[frame].push_back(std::move(set));
        }
    return out;
}

}  // namespace causalstab
