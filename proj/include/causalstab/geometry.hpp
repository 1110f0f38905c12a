#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "causalstab/common.hpp"

namespace causalstab
{

/// 3×3 projective transform. Stored normalized so m(2,2) == 1 whenever that entry is nonzero.
struct Homography
{
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    bool normalized = true;

    static Homography identity() { return {}; }
    static Homography translation(double dx, double dy);
    static Homography from_matrix(const Eigen::Matrix3d& m);

    Homography inverse() const;
    Homography operator*(const Homography& rhs) const { return from_matrix(m * rhs.m); }
};

struct Correspondence
{
    Point2 src = Point2::Zero();
    Point2 dst = Point2::Zero();
    double weight = 1.0;
};

struct RansacConfig
{
    int max_iters = 500;
    double inlier_threshold = 1.5;
    double min_inlier_fraction = 0.25;
    std::uint64_t seed = 0;
    /// Early-exit confidence for the adaptive iteration bound.
    double confidence = 0.999;

    void validate() const;
};

struct RansacResult
{
    Homography h;
    std::vector<bool> inlier_mask;
    int inlier_count = 0;
};

/// Normalized DLT. Throws TooFewPoints (< 4) or DegenerateConfiguration.
Homography estimate_homography_dlt(std::span<const Correspondence> corrs);

/// Seeded 4-point RANSAC with a final DLT refit on the consensus set. Throws NoConsensus.
RansacResult estimate_homography_ransac(std::span<const Correspondence> corrs, const RansacConfig& cfg);

/// Perspective application. Throws PointAtInfinity when |w| < 1e-12.
template <typename Derived>
Point2 project(const Homography& h, const Eigen::MatrixBase<Derived>& p)
{
    const Eigen::Vector3d q = h.m * Eigen::Vector3d(p.x(), p.y(), 1.0);
    if (std::abs(q.z()) < 1e-12)
        throw Error(Errc::PointAtInfinity, "homogeneous depth vanished");
    return {q.x() / q.z(), q.y() / q.z()};
}

/// True when three points are collinear relative to their bounding-box area.
bool nearly_collinear(const Point2& a, const Point2& b, const Point2& c, double bbox_area);

/// Exact homography through four point pairs with h33 fixed to 1, plus the pieces
/// needed to differentiate mapped points with respect to the destination corners.
class QuadHomography
{
public:
    QuadHomography(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst);

    bool ok() const { return ok_; }
    const Eigen::Matrix3d& matrix() const { return H_; }

    Point2 map(const Point2& p) const;

    /// d map(p) / d (dst0.x, dst0.y, ..., dst3.x, dst3.y).
    Eigen::Matrix<double, 2, 8> jacobian(const Point2& p) const;

private:
    Eigen::Matrix3d H_ = Eigen::Matrix3d::Identity();
    Eigen::Matrix<double, 8, 8> dh_ddst_ = Eigen::Matrix<double, 8, 8>::Zero();
    bool ok_ = false;
};

/// Homography from an axis-aligned grid cell (origin, size) to four displaced corners, solved
/// in cell-local unit coordinates. Corner order: top-left, top-right, bottom-right, bottom-left.
class CellMapping
{
public:
    CellMapping(const Point2& origin, const Vec2& size, const std::array<Point2, 4>& corners);

    bool ok() const { return quad_.ok(); }
    Point2 map(const Point2& p) const;
    /// d map(p) / d (corner0.x, corner0.y, ..., corner3.x, corner3.y), all in pixels.
    Eigen::Matrix<double, 2, 8> jacobian(const Point2& p) const;

private:
    Point2 origin_;
    Vec2 size_;
    QuadHomography quad_;
};

/// Dense 2-vector field on a rows×cols lattice (row-major). Sampling coordinates
/// are lattice units: x in [0, cols-1], y in [0, rows-1].
template <typename Scalar>
struct VectorField
{
    int rows = 0;
    int cols = 0;
    Pairs<Scalar> data;

    VectorField() = default;
    VectorField(int r, int c) : rows(r), cols(c), data(Pairs<Scalar>::Zero(Eigen::Index(r) * c, 2)) {}

    Eigen::Index index(int r, int c) const { return Eigen::Index(r) * cols + c; }
    auto at(int r, int c) { return data.row(index(r, c)); }
    auto at(int r, int c) const { return data.row(index(r, c)); }
    bool same_shape(const VectorField& o) const { return rows == o.rows && cols == o.cols; }
};

using Field2d = VectorField<double>;
using Field2f = VectorField<float>;

/// Four lattice nodes and their bilinear weights around a (clamped) sample position.
struct BilinearStencil
{
    std::array<Eigen::Index, 4> index{};
    std::array<double, 4> weight{};
};

inline BilinearStencil bilinear_stencil(int rows, int cols, double x, double y)
{
    x = std::clamp(x, 0.0, double(cols - 1));
    y = std::clamp(y, 0.0, double(rows - 1));
    const int x0 = std::min(int(std::floor(x)), std::max(cols - 2, 0));
    const int y0 = std::min(int(std::floor(y)), std::max(rows - 2, 0));
    const int x1 = std::min(x0 + 1, cols - 1);
    const int y1 = std::min(y0 + 1, rows - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    BilinearStencil s;
    s.index = {Eigen::Index(y0) * cols + x0, Eigen::Index(y0) * cols + x1, Eigen::Index(y1) * cols + x0,
               Eigen::Index(y1) * cols + x1};
    s.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    return s;
}

/// Bilinear blend of the 4 surrounding samples; positions outside the lattice clamp to the border.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> bilinear_sample(const VectorField<Scalar>& field, double x, double y)
{
    const BilinearStencil s = bilinear_stencil(field.rows, field.cols, x, y);
    Eigen::Matrix<double, 2, 1> acc = Eigen::Matrix<double, 2, 1>::Zero();
    for (int k = 0; k < 4; ++k)
        acc += s.weight[k] * field.data.row(s.index[k]).transpose().template cast<double>();
    return acc.template cast<Scalar>();
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> bilinear_sample(const VectorField<Scalar>& field, const Point2& p)
{
    return bilinear_sample(field, p.x(), p.y());
}

/// Bilinear sample of a scalar plane with replicate border.
template <typename Scalar>
double sample_plane(const Plane<Scalar>& img, double x, double y)
{
    const int w = int(img.cols());
    const int h = int(img.rows());
    x = std::clamp(x, 0.0, double(w - 1));
    y = std::clamp(y, 0.0, double(h - 1));
    const int x0 = std::min(int(x), std::max(w - 2, 0));
    const int y0 = std::min(int(y), std::max(h - 2, 0));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1 - fx) * double(img(y0, x0)) + fx * double(img(y0, x1));
    const double bot = (1 - fx) * double(img(y1, x0)) + fx * double(img(y1, x1));
    return (1 - fy) * top + fy * bot;
}

}  // namespace causalstab
