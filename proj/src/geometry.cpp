#include "causalstab/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace causalstab
{

std::string_view to_string(Errc code)
{
    switch (code)
    {
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::DegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::NoConsensus: return "NoConsensus";
    case Errc::PointAtInfinity: return "PointAtInfinity";
    case Errc::EmptyFrame: return "EmptyFrame";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptySample: return "EmptySample";
    case Errc::SpecMismatch: return "SpecMismatch";
    case Errc::AllFramesInvalid: return "AllFramesInvalid";
    case Errc::TooShort: return "TooShort";
    case Errc::ViewportUnderflow: return "ViewportUnderflow";
    case Errc::SourceError: return "SourceError";
    case Errc::SinkError: return "SinkError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Homography Homography::translation(double dx, double dy)
{
    Homography h;
    h.m(0, 2) = dx;
    h.m(1, 2) = dy;
    return h;
}

Homography Homography::from_matrix(const Eigen::Matrix3d& m)
{
    Homography h;
    if (std::abs(m(2, 2)) > std::numeric_limits<double>::min())
    {
        h.m = m / m(2, 2);
        h.normalized = true;
    }
    else
    {
        h.m = m;
        h.normalized = false;
    }
    return h;
}

Homography Homography::inverse() const
{
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible())
        throw Error(Errc::DegenerateConfiguration, "homography is singular");
    return from_matrix(lu.inverse());
}

void RansacConfig::validate() const
{
    if (max_iters < 1)
        throw Error(Errc::ConfigError, "ransac.max_iters must be >= 1");
    if (!(inlier_threshold > 0))
        throw Error(Errc::ConfigError, "ransac.inlier_threshold must be > 0");
    if (min_inlier_fraction < 0 || min_inlier_fraction > 1)
        throw Error(Errc::ConfigError, "ransac.min_inlier_fraction must be in [0, 1]");
    if (!(confidence > 0 && confidence < 1))
        throw Error(Errc::ConfigError, "ransac.confidence must be in (0, 1)");
}

bool nearly_collinear(const Point2& a, const Point2& b, const Point2& c, double bbox_area)
{
    const Vec2 u = b - a;
    const Vec2 v = c - a;
    const double area = 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
    return area < 1e-6 * bbox_area;
}

namespace
{

double bbox_area(std::span<const Point2> pts)
{
    Eigen::Vector2d lo = pts[0], hi = pts[0];
    for (const auto& p : pts)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).prod();
}

bool quad_degenerate(const std::array<Point2, 4>& q)
{
    const double area = bbox_area(q);
    if (!(area > 0))
        return true;
    for (int skip = 0; skip < 4; ++skip)
    {
        std::array<Point2, 3> t;
        for (int i = 0, k = 0; i < 4; ++i)
            if (i != skip)
                t[k++] = q[i];
        if (nearly_collinear(t[0], t[1], t[2], area))
            return true;
    }
    return false;
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d hartley_transform(const std::vector<Point2>& pts)
{
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : pts)
        centroid += p;
    centroid /= double(pts.size());
    double mean_dist = 0;
    for (const auto& p : pts)
        mean_dist += (p - centroid).norm();
    mean_dist /= double(pts.size());
    if (!(mean_dist > 0))
        throw Error(Errc::DegenerateConfiguration, "all points coincide");
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
    T(0, 0) = s;
    T(1, 1) = s;
    T(0, 2) = -s * centroid.x();
    T(1, 2) = -s * centroid.y();
    return T;
}

}  // namespace

Homography estimate_homography_dlt(std::span<const Correspondence> corrs)
{
    const std::size_t n = corrs.size();
    if (n < 4)
        throw Error(Errc::TooFewPoints, "DLT needs at least 4 correspondences, got " + std::to_string(n));

    std::vector<Point2> src(n), dst(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        src[i] = corrs[i].src;
        dst[i] = corrs[i].dst;
    }
    if (n == 4)
    {
        if (quad_degenerate({src[0], src[1], src[2], src[3]}) || quad_degenerate({dst[0], dst[1], dst[2], dst[3]}))
            throw Error(Errc::DegenerateConfiguration, "three of the four points are collinear");
    }

    const Eigen::Matrix3d Ts = hartley_transform(src);
    const Eigen::Matrix3d Td = hartley_transform(dst);

    Eigen::MatrixXd A(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i)
    {
        const Eigen::Vector3d p = Ts * src[i].homogeneous();
        const Eigen::Vector3d q = Td * dst[i].homogeneous();
        const double w = corrs[i].weight;
        const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
        A.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
        A.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
        A.row(2 * i) *= w;
        A.row(2 * i + 1) *= w;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A unique solution needs a one-dimensional null space.
    if (sv.size() < 8 || !(sv(0) > 0) || sv(7) < 1e-10 * sv(0))
        throw Error(Errc::DegenerateConfiguration, "rank-deficient DLT system");

    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d Hn;
    Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Eigen::Matrix3d H = Td.inverse() * Hn * Ts;
    if (std::abs(H(2, 2)) < 1e-14 * H.norm())
        throw Error(Errc::DegenerateConfiguration, "homography maps the origin to infinity");
    return Homography::from_matrix(H);
}

namespace
{

int count_inliers(const Homography& h, std::span<const Correspondence> corrs, double thr, std::vector<bool>* mask,
                  double* sse)
{
    int count = 0;
    double err_sum = 0;
    const double thr2 = thr * thr;
    for (std::size_t i = 0; i < corrs.size(); ++i)
    {
        const Eigen::Vector3d q = h.m * corrs[i].src.homogeneous();
        bool in = false;
        if (std::abs(q.z()) >= 1e-12)
        {
            const double e2 = (q.hnormalized() - corrs[i].dst).squaredNorm();
            if (e2 <= thr2)
            {
                in = true;
                err_sum += e2;
            }
        }
        if (mask)
            (*mask)[i] = in;
        count += in;
    }
    if (sse)
        *sse = err_sum;
    return count;
}

}  // namespace

RansacResult estimate_homography_ransac(std::span<const Correspondence> corrs, const RansacConfig& cfg)
{
    cfg.validate();
    const int n = int(corrs.size());
    if (n < 4)
        throw Error(Errc::TooFewPoints, "RANSAC needs at least 4 correspondences, got " + std::to_string(n));

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    Homography best;
    int best_count = -1;
    double best_sse = std::numeric_limits<double>::infinity();
    long needed = cfg.max_iters;

    std::array<Correspondence, 4> sample;
    for (long iter = 0; iter < std::min<long>(needed, cfg.max_iters); ++iter)
    {
        std::array<int, 4> idx{};
        for (int k = 0; k < 4; ++k)
        {
            int c;
            do
                c = pick(rng);
            while (std::find(idx.begin(), idx.begin() + k, c) != idx.begin() + k);
            idx[k] = c;
            sample[k] = corrs[c];
            sample[k].weight = 1.0;
        }

        Homography h;
        try
        {
            h = estimate_homography_dlt(sample);
        }
        catch (const Error&)
        {
            continue;
        }

        double sse = 0;
        const int count = count_inliers(h, corrs, cfg.inlier_threshold, nullptr, &sse);
        if (count > best_count || (count == best_count && sse < best_sse))
        {
            best = h;
            best_count = count;
            best_sse = sse;
            const double w = double(count) / n;
            if (w >= 1.0)
                needed = iter + 1;
            else if (w > 0)
            {
                const double denom = std::log(1.0 - std::pow(w, 4));
                if (denom < 0)
                    needed = std::min<long>(cfg.max_iters, long(std::ceil(std::log(1.0 - cfg.confidence) / denom)));
            }
        }
    }

    if (best_count < 4 || best_count < cfg.min_inlier_fraction * n)
        throw Error(Errc::NoConsensus, "best consensus " + std::to_string(std::max(best_count, 0)) + " of " +
                                           std::to_string(n));

    RansacResult result;
    result.h = best;
    result.inlier_mask.assign(n, false);
    result.inlier_count = count_inliers(best, corrs, cfg.inlier_threshold, &result.inlier_mask, nullptr);

    // Refit on the consensus set; keep refitting while the set does not shrink.
    for (int round = 0; round < 3; ++round)
    {
        std::vector<Correspondence> inliers;
        for (int i = 0; i < n; ++i)
            if (result.inlier_mask[i])
                inliers.push_back(corrs[i]);
        Homography refit;
        try
        {
            refit = estimate_homography_dlt(inliers);
        }
        catch (const Error&)
        {
            break;
        }
        std::vector<bool> mask(n);
        const int count = count_inliers(refit, corrs, cfg.inlier_threshold, &mask, nullptr);
        if (count < result.inlier_count)
            break;
        const bool same = mask == result.inlier_mask;
        result.h = refit;
        result.inlier_mask = std::move(mask);
        result.inlier_count = count;
        if (same)
            break;
    }
    return result;
}

QuadHomography::QuadHomography(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst)
{
    Eigen::Matrix<double, 8, 8> A;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i)
    {
        const double x = src[i].x(), y = src[i].y(), u = dst[i].x(), v = dst[i].y();
        A.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
        A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    Eigen::PartialPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
    if (!(lu.rcond() > 1e-15))
        return;
    const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
    H_ << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;

    // A dh + dA h = db; for dst corner i both coordinates scale by w_i = h6 x_i + h7 y_i + 1.
    Eigen::Matrix<double, 8, 8> Ainv = lu.inverse();
    for (int i = 0; i < 4; ++i)
    {
        const double wi = h(6) * src[i].x() + h(7) * src[i].y() + 1.0;
        dh_ddst_.col(2 * i) = Ainv.col(2 * i) * wi;
        dh_ddst_.col(2 * i + 1) = Ainv.col(2 * i + 1) * wi;
    }
    ok_ = H_.allFinite();
}

Point2 QuadHomography::map(const Point2& p) const
{
    const Eigen::Vector3d q = H_ * p.homogeneous();
    return q.hnormalized();
}

Eigen::Matrix<double, 2, 8> QuadHomography::jacobian(const Point2& p) const
{
    const double w = H_(2, 0) * p.x() + H_(2, 1) * p.y() + 1.0;
    const Point2 q = map(p);
    Eigen::Matrix<double, 2, 8> dq_dh = Eigen::Matrix<double, 2, 8>::Zero();
    dq_dh(0, 0) = p.x() / w;
    dq_dh(0, 1) = p.y() / w;
    dq_dh(0, 2) = 1.0 / w;
    dq_dh(1, 3) = p.x() / w;
    dq_dh(1, 4) = p.y() / w;
    dq_dh(1, 5) = 1.0 / w;
    dq_dh(0, 6) = -q.x() * p.x() / w;
    dq_dh(0, 7) = -q.x() * p.y() / w;
    dq_dh(1, 6) = -q.y() * p.x() / w;
    dq_dh(1, 7) = -q.y() * p.y() / w;
    return dq_dh * dh_ddst_;
}

namespace
{

std::array<Point2, 4> unit_square()
{
    return {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)};
}

std::array<Point2, 4> to_local(const Point2& origin, const Vec2& size, const std::array<Point2, 4>& corners)
{
    std::array<Point2, 4> out;
    for (int k = 0; k < 4; ++k)
        out[k] = (corners[k] - origin).cwiseQuotient(size);
    return out;
}

}  // namespace

CellMapping::CellMapping(const Point2& origin, const Vec2& size, const std::array<Point2, 4>& corners)
    : origin_(origin), size_(size), quad_(unit_square(), to_local(origin, size, corners))
{
}

Point2 CellMapping::map(const Point2& p) const
{
    return origin_ + quad_.map((p - origin_).cwiseQuotient(size_)).cwiseProduct(size_);
}

Eigen::Matrix<double, 2, 8> CellMapping::jacobian(const Point2& p) const
{
    const Eigen::Matrix<double, 2, 8> J = quad_.jacobian((p - origin_).cwiseQuotient(size_));
    Eigen::Matrix<double, 2, 8> out;
    for (int k = 0; k < 4; ++k)
    {
        out(0, 2 * k) = J(0, 2 * k);
        out(1, 2 * k) = J(1, 2 * k) * size_.y() / size_.x();
        out(0, 2 * k + 1) = J(0, 2 * k + 1) * size_.x() / size_.y();
        out(1, 2 * k + 1) = J(1, 2 * k + 1);
    }
    return out;
}

}  // namespace causalstab
