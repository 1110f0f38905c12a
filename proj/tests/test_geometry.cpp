#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "causalstab/geometry.hpp"

using namespace causalstab;

namespace
{

Homography random_homography(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> lin(-0.2, 0.2), persp(-2e-4, 2e-4), shift(-20, 20);
    for (;;)
    {
        Eigen::Matrix3d m;
        m << 1 + lin(rng), lin(rng), shift(rng), lin(rng), 1 + lin(rng), shift(rng), persp(rng), persp(rng), 1;
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
        if (svd.singularValues()(0) / svd.singularValues()(2) < 100)
            return Homography::from_matrix(m);
    }
}

std::vector<Correspondence> exact_corrs(const Homography& h, int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
    std::vector<Correspondence> c;
    for (int i = 0; i < n; ++i)
    {
        Point2 p(ux(rng), uy(rng));
        c.push_back({p, project(h, p), 1.0});
    }
    return c;
}

double frobenius_gap(const Homography& a, const Homography& b)
{
    return (a.m / a.m(2, 2) - b.m / b.m(2, 2)).norm();
}

}  // namespace

TEST(Dlt, IdentityFromUnitSquare)
{
    std::vector<Correspondence> c = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}, {{1, 1}, {1, 1}}};
    const Homography h = estimate_homography_dlt(c);
    EXPECT_LT((h.m - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    EXPECT_DOUBLE_EQ(h.m(2, 2), 1.0);
}

TEST(Dlt, PureTranslation)
{
    std::vector<Correspondence> c;
    for (Point2 p : {Point2(0, 0), Point2(1, 0), Point2(0, 1), Point2(1, 1)})
        c.push_back({p, p + Vec2(5, -3)});
    const Homography h = estimate_homography_dlt(c);
    EXPECT_NEAR(h.m(0, 2), 5.0, 1e-12);
    EXPECT_NEAR(h.m(1, 2), -3.0, 1e-12);
    EXPECT_NEAR(h.m(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(h.m(2, 0), 0.0, 1e-12);
}

TEST(Dlt, RecoversRandomHomographyFromEightPoints)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Homography truth = random_homography(rng);
        const auto c = exact_corrs(truth, 8, rng);
        EXPECT_LT(frobenius_gap(estimate_homography_dlt(c), truth), 1e-6);
    }
}

TEST(Dlt, InvariantToUniformRescaling)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Homography truth = random_homography(rng);
        auto c = exact_corrs(truth, 12, rng);
        for (auto& k : c)
            k.dst += Vec2(0.01 * std::sin(k.src.x()), 0.01 * std::cos(k.src.y()));
        const double s = scale(rng);
        auto scaled = c;
        for (auto& k : scaled)
        {
            k.src *= s;
            k.dst *= s;
        }
        const Homography a = estimate_homography_dlt(c);
        const Homography b = estimate_homography_dlt(scaled);
        Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
        S(0, 0) = S(1, 1) = s;
        const Homography back = Homography::from_matrix(S.inverse() * b.m * S);
        EXPECT_LT(frobenius_gap(a, back), 1e-6);
    }
}

TEST(Dlt, Errors)
{
    std::vector<Correspondence> three = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
    try
    {
        estimate_homography_dlt(three);
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::TooFewPoints);
    }

    std::vector<Correspondence> collinear = {
        {{0, 0}, {0, 0}}, {{1, 1}, {1, 1}}, {{2, 2}, {2, 2}}, {{0, 3}, {0, 3}}};
    try
    {
        estimate_homography_dlt(collinear);
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::DegenerateConfiguration);
    }
}

TEST(Ransac, NoOutliersRecoversExactly)
{
    std::mt19937_64 rng(3);
    const Homography truth = random_homography(rng);
    const auto c = exact_corrs(truth, 20, rng);
    const RansacResult r = estimate_homography_ransac(c, RansacConfig{});
    EXPECT_EQ(r.inlier_count, 20);
    EXPECT_LT(frobenius_gap(r.h, truth), 1e-6);
}

TEST(Ransac, ThirtyPercentOutliers)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
    const Homography truth = random_homography(rng);
    auto c = exact_corrs(truth, 70, rng);
    for (auto& k : c)
        k.dst += Vec2(noise(rng), noise(rng));
    for (int i = 0; i < 30; ++i)
        c.push_back({{ux(rng), uy(rng)}, {ux(rng), uy(rng)}, 1.0});

    RansacConfig cfg;
    cfg.inlier_threshold = 1.5;
    const RansacResult r = estimate_homography_ransac(c, cfg);
    int marked = 0;
    double sse = 0;
    for (int i = 0; i < 70; ++i)
    {
        marked += r.inlier_mask[i];
        const Point2 exact = project(truth, c[i].src);
        sse += (project(r.h, c[i].src) - exact).squaredNorm();
    }
    EXPECT_GE(marked, 68);
    EXPECT_LT(std::sqrt(sse / 70), 0.5);
}

TEST(Ransac, TooFewPoints)
{
    std::vector<Correspondence> c(3);
    EXPECT_THROW(estimate_homography_ransac(c, RansacConfig{}), Error);
}

TEST(Ransac, NoConsensusWhenAllRandom)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1000);
    std::vector<Correspondence> c;
    for (int i = 0; i < 40; ++i)
        c.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}, 1.0});
    RansacConfig cfg;
    cfg.min_inlier_fraction = 0.5;
    try
    {
        estimate_homography_ransac(c, cfg);
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::NoConsensus);
    }
}

TEST(Ransac, DeterministicGivenSeed)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 640);
    const Homography truth = random_homography(rng);
    auto c = exact_corrs(truth, 50, rng);
    for (int i = 0; i < 25; ++i)
        c.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}, 1.0});
    RansacConfig cfg;
    cfg.seed = 42;
    const RansacResult a = estimate_homography_ransac(c, cfg);
    const RansacResult b = estimate_homography_ransac(c, cfg);
    EXPECT_EQ(a.inlier_mask, b.inlier_mask);
    EXPECT_EQ(a.h.m, b.h.m);
}

TEST(Project, IdentityTranslationRoundTrip)
{
    EXPECT_EQ(project(Homography::identity(), Point2(7, 9)), Point2(7, 9));
    EXPECT_EQ(project(Homography::translation(5, -3), Point2(0, 0)), Point2(5, -3));

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 640);
    for (int trial = 0; trial < 50; ++trial)
    {
        const Homography h = random_homography(rng);
        const Homography inv = h.inverse();
        const Point2 p(u(rng), u(rng));
        EXPECT_LT((project(inv, project(h, p)) - p).norm(), 1e-9);
    }
}

TEST(Project, PointAtInfinity)
{
    Homography h;
    h.m << 1, 0, 0, 0, 1, 0, 1, 0, 0;
    try
    {
        project(h, Point2(0, 5));
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::PointAtInfinity);
    }
}

TEST(Bilinear, NodesConstantsAndAffineFields)
{
    Field2d f(4, 5);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-3, 3);
    for (Eigen::Index i = 0; i < f.data.rows(); ++i)
        f.data.row(i) << u(rng), u(rng);
    EXPECT_EQ(bilinear_sample(f, 2.0, 3.0), f.at(3, 2).transpose());
    EXPECT_EQ(bilinear_sample(f, 4.0, 3.0), f.at(3, 4).transpose());

    Field2d c(4, 5);
    c.data.col(0).setConstant(1.5);
    c.data.col(1).setConstant(-2.0);
    EXPECT_LT((bilinear_sample(c, 1.37, 2.91) - Vec2(1.5, -2.0)).norm(), 1e-15);

    Field2d lin(6, 7);
    for (int r = 0; r < 6; ++r)
        for (int col = 0; col < 7; ++col)
            lin.at(r, col) << 2.0 * col - 0.5 * r + 1.0, -col + 3.0 * r;
    for (int trial = 0; trial < 30; ++trial)
    {
        std::uniform_real_distribution<double> ux(0, 6), uy(0, 5);
        const double x = ux(rng), y = uy(rng);
        EXPECT_LT((bilinear_sample(lin, x, y) - Vec2(2 * x - 0.5 * y + 1, -x + 3 * y)).norm(), 1e-9);
    }
    // Cell centre of the linear field.
    EXPECT_LT((bilinear_sample(lin, 2.5, 1.5) - Vec2(5.25, 2.0)).norm(), 1e-9);
    // Outside the lattice clamps to the border.
    EXPECT_EQ(bilinear_sample(f, -3.0, -1.0), f.at(0, 0).transpose());
}

TEST(QuadHomography, MapsCornersAndJacobianMatchesFiniteDifferences)
{
    std::array<Point2, 4> src = {Point2(0, 0), Point2(10, 0), Point2(0, 8), Point2(10, 8)};
    std::array<Point2, 4> dst = {Point2(1, 0.5), Point2(11.3, -0.2), Point2(-0.4, 8.7), Point2(10.2, 9.1)};
    QuadHomography q(src, dst);
    ASSERT_TRUE(q.ok());
    for (int i = 0; i < 4; ++i)
        EXPECT_LT((q.map(src[i]) - dst[i]).norm(), 1e-10);

    const Point2 p(3.3, 5.1);
    const auto J = q.jacobian(p);
    const double h = 1e-6;
    for (int k = 0; k < 8; ++k)
    {
        auto plus = dst, minus = dst;
        plus[k / 2][k % 2] += h;
        minus[k / 2][k % 2] -= h;
        const Vec2 fd = (QuadHomography(src, plus).map(p) - QuadHomography(src, minus).map(p)) / (2 * h);
        EXPECT_LT((fd - J.col(k)).norm(), 1e-7) << "column " << k;
    }
}
