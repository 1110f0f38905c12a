#include "causalstab/observer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace causalstab
{

std::string detector_name(Detector d)
{
    return d == Detector::ShiTomasi ? "shitomasi" : "fast9";
}

Detector parse_detector(const std::string& name)
{
    if (name == "shitomasi")
        return Detector::ShiTomasi;
    if (name == "fast9")
        return Detector::Fast9;
    throw Error(Errc::ConfigError, "unknown builtin detector '" + name + "'");
}

std::size_t GuidanceMask::count() const
{
    return std::size_t(std::count(bits.begin(), bits.end(), std::uint8_t(1)));
}

void MotionSample::resize(Eigen::Index n)
{
    keypoints.setZero(n, 2);
    displacements.setZero(n, 2);
    confidences.setZero(n);
}

double ObserverConfig::weight(const std::string& detector_id) const
{
    auto it = detector_weights.find(detector_id);
    return it == detector_weights.end() ? 1.0 : it->second;
}

void ObserverConfig::validate() const
{
    auto positive = [](double v, const char* key) {
        if (!(v > 0))
            throw Error(Errc::ConfigError, std::string("observer.") + key + " must be positive");
    };
    positive(nms_radius, "nms_radius");
    positive(grid_gx, "grid_gx");
    positive(grid_gy, "grid_gy");
    positive(per_cell_k, "per_cell_k");
    positive(min_separation, "min_separation");
    positive(mask_radius, "mask_radius");
    positive(pyramid_levels, "pyramid_levels");
    positive(lk_window, "lk_window");
    positive(lk_iterations, "lk_iterations");
    positive(dense_stride, "dense_stride");
    positive(max_candidates, "max_candidates");
    positive(fast_threshold, "fast_threshold");
    for (const auto& [id, w] : detector_weights)
        if (!(w >= 0))
            throw Error(Errc::ConfigError, "observer.detector_weights." + id + " must be >= 0");
    for (const auto& d : detectors)
        parse_detector(d);
}

namespace
{

// Uniform bucket grid over the image for radius and nearest-neighbour queries.
class PointIndex
{
public:
    PointIndex(double cell, int width, int height)
        : cell_(std::max(cell, 1.0)),
          nx_(std::max(1, int(std::ceil(width / cell_)) + 1)),
          ny_(std::max(1, int(std::ceil(height / cell_)) + 1)),
          buckets_(std::size_t(nx_) * ny_)
    {
    }

    void insert(int id, const Point2& p)
    {
        buckets_[bucket(p)].push_back({id, p});
    }

    template <typename Fn>
    void for_each_within(const Point2& p, double radius, Fn&& fn) const
    {
        const int r = int(std::ceil(radius / cell_));
        const int cx = cx_of(p.x()), cy = cy_of(p.y());
        const double r2 = radius * radius;
        for (int y = std::max(cy - r, 0); y <= std::min(cy + r, ny_ - 1); ++y)
            for (int x = std::max(cx - r, 0); x <= std::min(cx + r, nx_ - 1); ++x)
                for (const auto& e : buckets_[std::size_t(y) * nx_ + x])
                    if ((e.p - p).squaredNorm() <= r2)
                        fn(e.id, e.p);
    }

    /// Up to k nearest entries as (squared distance, id), nearest first.
    std::vector<std::pair<double, int>> nearest(const Point2& p, std::size_t k) const
    {
        std::vector<std::pair<double, int>> best;
        const int cx = cx_of(p.x()), cy = cy_of(p.y());
        const int max_ring = std::max(nx_, ny_);
        for (int ring = 0; ring <= max_ring; ++ring)
        {
            for (int y = cy - ring; y <= cy + ring; ++y)
            {
                if (y < 0 || y >= ny_)
                    continue;
                for (int x = cx - ring; x <= cx + ring; ++x)
                {
                    if (x < 0 || x >= nx_)
                        continue;
                    if (std::max(std::abs(x - cx), std::abs(y - cy)) != ring)
                        continue;
                    for (const auto& e : buckets_[std::size_t(y) * nx_ + x])
                        best.emplace_back((e.p - p).squaredNorm(), e.id);
                }
            }
            if (best.size() >= k)
            {
                std::partial_sort(best.begin(), best.begin() + long(k), best.end());
                best.resize(k);
                // Anything in the next ring is at least ring * cell away.
                const double reach = ring * cell_;
                if (best.back().first <= reach * reach)
                    return best;
            }
        }
        std::sort(best.begin(), best.end());
        if (best.size() > k)
            best.resize(k);
        return best;
    }

private:
    struct Entry
    {
        int id;
        Point2 p;
    };

    int cx_of(double x) const { return std::clamp(int(std::floor(x / cell_)), 0, nx_ - 1); }
    int cy_of(double y) const { return std::clamp(int(std::floor(y / cell_)), 0, ny_ - 1); }
    std::size_t bucket(const Point2& p) const { return std::size_t(cy_of(p.y())) * nx_ + cx_of(p.x()); }

    double cell_;
    int nx_;
    int ny_;
    std::vector<std::vector<Entry>> buckets_;
};

struct Candidate
{
    double score;
    int x;
    int y;
};

// Keeps 3x3 local maxima above the threshold, applies radius NMS, caps the count and
// normalises scores by the frame maximum.
KeypointSet finalize_response(const Planef& response, float threshold, int margin, Detector det, const Frame& frame,
                              const ObserverConfig& cfg)
{
    const int h = int(response.rows()), w = int(response.cols());
    std::vector<Candidate> cands;
    for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin; ++x)
        {
            const float v = response(y, x);
            if (!(v > threshold))
                continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                {
                    if (dx == 0 && dy == 0)
                        continue;
                    const float o = response(y + dy, x + dx);
                    // Ties resolve toward the earlier pixel in raster order.
                    if (o > v || (o == v && (dy < 0 || (dy == 0 && dx < 0))))
                    {
                        is_max = false;
                        break;
                    }
                }
            if (is_max)
                cands.push_back({v, x, y});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

    KeypointSet out;
    out.frame_index = frame.index;
    out.width = frame.width;
    out.height = frame.height;
    PointIndex index(cfg.nms_radius, w, h);
    for (const auto& c : cands)
    {
        if (int(out.points.size()) >= cfg.max_candidates)
            break;
        const Point2 p(c.x, c.y);
        bool suppressed = false;
        index.for_each_within(p, cfg.nms_radius, [&](int, const Point2&) { suppressed = true; });
        if (suppressed)
            continue;
        index.insert(int(out.points.size()), p);
        out.points.push_back({double(c.x), double(c.y), c.score, detector_name(det)});
    }
    if (!out.points.empty())
    {
        const double top = out.points.front().score;
        for (auto& p : out.points)
            p.score /= top;
    }
    return out;
}

// Separable 5-tap Gaussian (sigma = 1) over the structure tensor entries.
Planef gaussian5(const Planef& src)
{
    static constexpr float k[5] = {0.05449f, 0.24420f, 0.40262f, 0.24420f, 0.05449f};
    const int h = int(src.rows()), w = int(src.cols());
    Planef tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
        {
            float acc = 0;
            for (int i = -2; i <= 2; ++i)
                acc += k[i + 2] * src(y, std::clamp(x + i, 0, w - 1));
            tmp(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
        {
            float acc = 0;
            for (int i = -2; i <= 2; ++i)
                acc += k[i + 2] * tmp(std::clamp(y + i, 0, h - 1), x);
            out(y, x) = acc;
        }
    return out;
}

Planef shi_tomasi_response(const Planef& gray)
{
    Planef gx, gy;
    image_gradients(gray, gx, gy);
    const Planef a = gaussian5(gx * gx), b = gaussian5(gx * gy), c = gaussian5(gy * gy);
    return (0.5f * (a + c) - (0.25f * (a - c).square() + b.square()).sqrt()).max(0.0f);
}

constexpr int kFastCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                    {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

Planef fast9_response(const Frame& frame, int threshold)
{
    const Planef gray = to_gray(frame) * 255.0f;
    const int h = int(gray.rows()), w = int(gray.cols());
    Planef resp = Planef::Zero(h, w);
    const float t = float(threshold);
    for (int y = 3; y < h - 3; ++y)
        for (int x = 3; x < w - 3; ++x)
        {
            const float c = gray(y, x);
            int state[16];
            for (int i = 0; i < 16; ++i)
            {
                const float v = gray(y + kFastCircle[i][1], x + kFastCircle[i][0]);
                state[i] = v > c + t ? 1 : (v < c - t ? -1 : 0);
            }
            bool corner = false;
            for (int sign : {1, -1})
            {
                int run = 0;
                for (int i = 0; i < 32 && !corner; ++i)
                {
                    run = state[i % 16] == sign ? run + 1 : 0;
                    corner = run >= 9;
                }
            }
            if (!corner)
                continue;
            float bright = 0, dark = 0;
            for (int i = 0; i < 16; ++i)
            {
                const float v = gray(y + kFastCircle[i][1], x + kFastCircle[i][0]);
                if (state[i] > 0)
                    bright += v - c - t;
                else if (state[i] < 0)
                    dark += c - v - t;
            }
            resp(y, x) = std::max(bright, dark);
        }
    return resp;
}

}  // namespace

KeypointSet detect_keypoints(const Frame& frame, Detector detector, const ObserverConfig& cfg)
{
    frame.validate();
    if (detector == Detector::ShiTomasi)
    {
        const Planef resp = shi_tomasi_response(to_gray(frame));
        const float threshold = std::max(float(cfg.quality_level) * resp.maxCoeff(), float(cfg.min_response));
        return finalize_response(resp, threshold, 3, detector, frame, cfg);
    }
    const Planef resp = fast9_response(frame, cfg.fast_threshold);
    return finalize_response(resp, 0.0f, 3, detector, frame, cfg);
}

namespace
{

struct Weighted
{
    ScoredKeypoint kp;
    double wscore;
};

}  // namespace

KeypointSet fuse_detections(const std::vector<KeypointSet>& sets, const ObserverConfig& cfg)
{
    KeypointSet out;
    if (sets.empty())
        return out;
    out.frame_index = sets.front().frame_index;
    out.width = sets.front().width;
    out.height = sets.front().height;

    std::vector<Weighted> all;
    for (const auto& set : sets)
    {
        if (set.frame_index != out.frame_index)
            throw Error(Errc::InvalidArgument, "fuse_detections: sets from different frames");
        for (const auto& kp : set.points)
        {
            const double ws = cfg.weight(kp.detector_id) * kp.score;
            if (ws > 0)
                all.push_back({kp, ws});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const Weighted& a, const Weighted& b) { return a.wscore > b.wscore; });

    PointIndex index(cfg.nms_radius, std::max(out.width, 1), std::max(out.height, 1));
    for (int i = 0; i < int(all.size()); ++i)
        index.insert(i, all[i].kp.pos());

    std::vector<bool> consumed(all.size(), false);
    std::vector<ScoredKeypoint> merged;
    for (int i = 0; i < int(all.size()); ++i)
    {
        if (consumed[i])
            continue;
        const auto& leader = all[i];
        // Offsets from the leader keep unmerged positions exact.
        Vec2 acc = Vec2::Zero();
        double mass = leader.wscore;
        consumed[i] = true;
        std::vector<int> hits;
        index.for_each_within(leader.kp.pos(), cfg.nms_radius, [&](int j, const Point2&) { hits.push_back(j); });
        std::sort(hits.begin(), hits.end());
        for (int j : hits)
        {
            if (consumed[j])
                continue;
            consumed[j] = true;
            // Same-source neighbours are plain NMS suppressions.
            if (all[j].kp.detector_id != leader.kp.detector_id)
            {
                acc += all[j].wscore * (all[j].kp.pos() - leader.kp.pos());
                mass += all[j].wscore;
            }
        }
        const Vec2 pos = leader.kp.pos() + acc / mass;
        merged.push_back({pos.x(), pos.y(), leader.wscore, leader.kp.detector_id});
    }

    // Merged positions can drift; a final pass restores the separation invariant.
    PointIndex kept(cfg.nms_radius, std::max(out.width, 1), std::max(out.height, 1));
    for (const auto& kp : merged)
    {
        bool close = false;
        kept.for_each_within(kp.pos(), cfg.nms_radius, [&](int, const Point2& q) {
            if ((q - kp.pos()).norm() < cfg.nms_radius)
                close = true;
        });
        if (close)
            continue;
        kept.insert(int(out.points.size()), kp.pos());
        out.points.push_back(kp);
    }
    return out;
}

KeypointSet homogenize(const KeypointSet& set, const ObserverConfig& cfg)
{
    KeypointSet out;
    out.frame_index = set.frame_index;
    out.width = set.width;
    out.height = set.height;
    if (set.points.empty())
        return out;

    std::vector<int> order(set.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return set.points[a].score > set.points[b].score; });

    const int gx = cfg.grid_gx, gy = cfg.grid_gy;
    std::vector<std::vector<Point2>> cells(std::size_t(gx) * gy);
    for (int i : order)
    {
        const auto& kp = set.points[i];
        const int cx = std::clamp(int(std::floor(kp.x * gx / std::max(set.width, 1))), 0, gx - 1);
        const int cy = std::clamp(int(std::floor(kp.y * gy / std::max(set.height, 1))), 0, gy - 1);
        auto& cell = cells[std::size_t(cy) * gx + cx];
        if (int(cell.size()) >= cfg.per_cell_k)
            continue;
        const bool separated = std::all_of(cell.begin(), cell.end(), [&](const Point2& q) {
            return (q - kp.pos()).norm() >= cfg.min_separation;
        });
        if (!separated)
            continue;
        cell.push_back(kp.pos());
        out.points.push_back(kp);
    }
    return out;
}

LkPyramid::LkPyramid(const Planef& base, int n)
{
    this->levels = build_pyramid(base, n);
    gx.resize(this->levels.size());
    gy.resize(this->levels.size());
    for (std::size_t l = 0; l < this->levels.size(); ++l)
        image_gradients(this->levels[l], gx[l], gy[l]);
}

std::optional<Point2> lk_track(const LkPyramid& from, const LkPyramid& to, const Point2& p, const Vec2& guess,
                               const LkParams& params)
{
    const int levels = int(std::min(from.levels.size(), to.levels.size()));
    const int half = params.window / 2;
    const int npx = (2 * half + 1) * (2 * half + 1);
    Vec2 g = guess / double(1 << (levels - 1));

    std::vector<double> tmpl(npx), ix(npx), iy(npx);
    for (int l = levels - 1; l >= 0; --l)
    {
        const double scale = 1.0 / double(1 << l);
        const Point2 pl = p * scale;
        const Planef& A = from.levels[l];
        const Planef& B = to.levels[l];

        double gxx = 0, gxy = 0, gyy = 0;
        int k = 0;
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx, ++k)
            {
                const double x = pl.x() + dx, y = pl.y() + dy;
                tmpl[k] = sample_plane(A, x, y);
                ix[k] = sample_plane(from.gx[l], x, y);
                iy[k] = sample_plane(from.gy[l], x, y);
                gxx += ix[k] * ix[k];
                gxy += ix[k] * iy[k];
                gyy += iy[k] * iy[k];
            }
        const double tr = 0.5 * (gxx + gyy);
        const double min_eig = (tr - std::sqrt(std::max(tr * tr - (gxx * gyy - gxy * gxy), 0.0))) / npx;
        if (min_eig < params.min_eigen)
            return std::nullopt;
        const double det = gxx * gyy - gxy * gxy;

        Vec2 d = Vec2::Zero();
        for (int it = 0; it < params.iterations; ++it)
        {
            double bx = 0, by = 0;
            k = 0;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx, ++k)
                {
                    const double diff =
                        tmpl[k] - sample_plane(B, pl.x() + dx + g.x() + d.x(), pl.y() + dy + g.y() + d.y());
                    bx += diff * ix[k];
                    by += diff * iy[k];
                }
            const Vec2 delta((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            d += delta;
            if (delta.squaredNorm() < 1e-6)
                break;
        }
        g = l > 0 ? Vec2(2.0 * (g + d)) : Vec2(g + d);
    }

    const Point2 q = p + g;
    const auto& base = to.levels.front();
    if (!q.allFinite() || q.x() < -1 || q.y() < -1 || q.x() > base.cols() || q.y() > base.rows())
        return std::nullopt;
    return q;
}

namespace
{

void check_same_dims(const Frame& a, const Frame& b)
{
    a.validate();
    b.validate();
    if (a.width != b.width || a.height != b.height)
        throw Error(Errc::DimensionMismatch, "frames differ in size");
}

LkParams lk_params(const ObserverConfig& cfg)
{
    return {cfg.lk_window, cfg.lk_iterations, 1e-5};
}

}  // namespace

MotionSample estimate_sparse_flow(const Frame& prev, const Frame& cur, const KeypointSet& pts,
                                  const ObserverConfig& cfg)
{
    check_same_dims(prev, cur);
    const LkPyramid from(to_gray(cur), cfg.pyramid_levels);
    const LkPyramid to(to_gray(prev), cfg.pyramid_levels);
    const LkParams params = lk_params(cfg);

    MotionSample m;
    m.frame_index = cur.index;
    m.width = cur.width;
    m.height = cur.height;
    m.resize(Eigen::Index(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        const Point2 p = pts.points[i].pos();
        m.keypoints.row(Eigen::Index(i)) = p.transpose();
        const auto q = lk_track(from, to, p, Vec2::Zero(), params);
        if (!q)
            continue;
        const auto back = lk_track(to, from, *q, p - *q, params);
        if (!back)
            continue;
        const double fb = (*back - p).norm();
        m.displacements.row(Eigen::Index(i)) = (p - *q).transpose();
        m.confidences(Eigen::Index(i)) = std::clamp(pts.points[i].score * std::exp(-fb), 0.0, 1.0);
    }
    return m;
}

namespace
{

constexpr double kDenseFbThreshold = 1.0;

}  // namespace

FlowField estimate_dense_flow(const Frame& prev, const Frame& cur, const ObserverConfig& cfg)
{
    check_same_dims(prev, cur);
    const LkPyramid from(to_gray(cur), cfg.pyramid_levels);
    const LkPyramid to(to_gray(prev), cfg.pyramid_levels);
    const LkParams params = lk_params(cfg);

    const int s = cfg.dense_stride;
    const int lw = (cur.width - 1 + s - 1) / s + 1;
    const int lh = (cur.height - 1 + s - 1) / s + 1;
    Field2d lattice(lh, lw);
    std::vector<bool> valid(std::size_t(lw) * lh, false);
    std::vector<double> us, vs;
    for (int r = 0; r < lh; ++r)
        for (int c = 0; c < lw; ++c)
        {
            const Point2 p(std::min(c * s, cur.width - 1), std::min(r * s, cur.height - 1));
            const auto q = lk_track(from, to, p, Vec2::Zero(), params);
            if (!q)
                continue;
            // Forward-backward consistency rejects nodes on weak or occluded texture.
            const auto back = lk_track(to, from, *q, p - *q, params);
            if (!back || (*back - p).norm() > kDenseFbThreshold)
                continue;
            const Vec2 f = p - *q;
            lattice.at(r, c) = f.transpose();
            valid[lattice.index(r, c)] = true;
            us.push_back(f.x());
            vs.push_back(f.y());
        }
    if (!us.empty())
    {
        // Grow valid values into rejected nodes ring by ring, then fall back to the median.
        for (bool grew = true; grew;)
        {
            grew = false;
            std::vector<bool> next = valid;
            for (int r = 0; r < lh; ++r)
                for (int c = 0; c < lw; ++c)
                {
                    if (valid[lattice.index(r, c)])
                        continue;
                    Vec2 acc = Vec2::Zero();
                    int n = 0;
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc)
                        {
                            const int rr = r + dr, cc = c + dc;
                            if (rr < 0 || cc < 0 || rr >= lh || cc >= lw || !valid[lattice.index(rr, cc)])
                                continue;
                            acc += lattice.at(rr, cc).transpose();
                            ++n;
                        }
                    if (n == 0)
                        continue;
                    lattice.at(r, c) = (acc / n).transpose();
                    next[lattice.index(r, c)] = true;
                    grew = true;
                }
            valid = std::move(next);
        }
        auto median = [](std::vector<double> v) {
            std::nth_element(v.begin(), v.begin() + long(v.size() / 2), v.end());
            return v[v.size() / 2];
        };
        const Vec2 fill(median(us), median(vs));
        for (Eigen::Index i = 0; i < lattice.data.rows(); ++i)
            if (!valid[std::size_t(i)])
                lattice.data.row(i) = fill.transpose();
    }

    FlowField out(cur.height, cur.width);
    for (int y = 0; y < cur.height; ++y)
        for (int x = 0; x < cur.width; ++x)
        {
            // Lattice node c sits at pixel min(c*s, W-1).
            const double lx = x >= (lw - 1) * s ? (lw - 1) : double(x) / s;
            const double ly = y >= (lh - 1) * s ? (lh - 1) : double(y) / s;
            double ax = lx, ay = ly;
            if (lw > 1 && x > (lw - 2) * s)
                ax = (lw - 2) + double(x - (lw - 2) * s) / double(cur.width - 1 - (lw - 2) * s);
            if (lh > 1 && y > (lh - 2) * s)
                ay = (lh - 2) + double(y - (lh - 2) * s) / double(cur.height - 1 - (lh - 2) * s);
            out.at(y, x) = bilinear_sample(lattice, ax, ay).cast<float>().transpose();
        }
    return out;
}

GuidanceMask build_guidance_mask(const KeypointSet& candidates, double radius, int width, int height)
{
    if (!(radius > 0))
        throw Error(Errc::InvalidArgument, "mask radius must be positive");
    GuidanceMask mask{width, height, std::vector<std::uint8_t>(std::size_t(width) * height, 0)};
    const double r2 = radius * radius;
    for (const auto& kp : candidates.points)
    {
        const int x0 = std::max(0, int(std::floor(kp.x - radius)));
        const int x1 = std::min(width - 1, int(std::ceil(kp.x + radius)));
        const int y0 = std::max(0, int(std::floor(kp.y - radius)));
        const int y1 = std::min(height - 1, int(std::ceil(kp.y + radius)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
            {
                const double dx = x - kp.x, dy = y - kp.y;
                if (dx * dx + dy * dy <= r2)
                    mask.bits[std::size_t(y) * width + x] = 1;
            }
    }
    return mask;
}

FlowField fuse_flow(const FlowField& dense, const KeypointSet& candidates, const GuidanceMask& mask)
{
    if (mask.width != dense.cols || mask.height != dense.rows)
        throw Error(Errc::DimensionMismatch, "guidance mask and flow field differ in size");
    if (candidates.points.empty())
        return dense;

    constexpr std::size_t kNeighbours = 16;
    const int n = int(candidates.points.size());
    Pairsd values(n, 2);
    const double cell = std::max(4.0, std::sqrt(double(dense.rows) * dense.cols / std::max(n, 1)));
    PointIndex index(cell, dense.cols, dense.rows);
    for (int i = 0; i < n; ++i)
    {
        const Point2 p = candidates.points[i].pos();
        values.row(i) = bilinear_sample(dense, p).cast<double>().transpose();
        index.insert(i, p);
    }

    FlowField out = dense;
    for (int y = 0; y < dense.rows; ++y)
        for (int x = 0; x < dense.cols; ++x)
        {
            if (mask.at(x, y))
                continue;
            const auto near = index.nearest(Point2(x, y), kNeighbours);
            Vec2 acc = Vec2::Zero();
            double wsum = 0;
            bool exact = false;
            for (const auto& [d2, id] : near)
            {
                if (d2 == 0)
                {
                    acc = values.row(id).transpose();
                    wsum = 1;
                    exact = true;
                    break;
                }
                const double w = 1.0 / d2;
                acc += w * values.row(id).transpose();
                wsum += w;
            }
            if (exact || wsum > 0)
                out.at(y, x) = (acc / wsum).cast<float>().transpose();
        }
    return out;
}

MotionSample sample_motion(const FlowField& fused, const KeypointSet& kp)
{
    MotionSample m;
    m.frame_index = kp.frame_index;
    m.width = kp.width;
    m.height = kp.height;
    m.resize(Eigen::Index(kp.size()));
    for (std::size_t i = 0; i < kp.size(); ++i)
    {
        const Point2 p = kp.points[i].pos();
        m.keypoints.row(Eigen::Index(i)) = p.transpose();
        m.displacements.row(Eigen::Index(i)) = bilinear_sample(fused, p).cast<double>().transpose();
        m.confidences(Eigen::Index(i)) = std::clamp(kp.points[i].score, 0.0, 1.0);
    }
    return m;
}

}  // namespace causalstab
