#include "causalstab/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <set>

namespace causalstab
{

void GridSpec::validate() const
{
    if (rows < 2 || cols < 2)
        throw Error(Errc::ConfigError, "grid needs at least 2x2 vertices");
    if (frame_width < 2 || frame_height < 2)
        throw Error(Errc::InvalidArgument, "grid frame must be at least 2x2 pixels");
}

Pairsd GridMotionField::deformed() const
{
    Pairsd p(spec.size(), 2);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            p.row(vectors.index(r, c)) = spec.vertex(r, c).transpose() + vectors.at(r, c);
    return p;
}

double PropagationConfig::temperature(const GridSpec& spec) const
{
    if (fusion_temperature > 0)
        return fusion_temperature;
    return std::hypot(spec.step_x(), spec.step_y());
}

void PropagationConfig::validate() const
{
    if (k_homo < 1)
        throw Error(Errc::ConfigError, "propagation.k_homo must be >= 1");
    if (kmeans_iters < 1)
        throw Error(Errc::ConfigError, "propagation.kmeans_iters must be >= 1");
    if (!(motion_weight > 0))
        throw Error(Errc::ConfigError, "propagation.motion_weight must be positive");
    if (residual_iters < 0)
        throw Error(Errc::ConfigError, "propagation.residual_iters must be >= 0");
    if (!(residual_step > 0))
        throw Error(Errc::ConfigError, "propagation.residual_step must be positive");
    if (!(lambda_kp >= 0) || !(lambda_proj >= 0) || !(lambda_struct >= 0))
        throw Error(Errc::ConfigError, "propagation loss weights must be >= 0");
    if (!(charbonnier_eps > 0))
        throw Error(Errc::ConfigError, "propagation.charbonnier_eps must be positive");
}

namespace
{

std::vector<int> observed_indices(const MotionSample& m)
{
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m.confidences(i) > 0 && m.keypoints.row(i).allFinite() && m.displacements.row(i).allFinite())
            idx.push_back(int(i));
    return idx;
}

}  // namespace

std::vector<HomographyCluster> cluster_displacements(const MotionSample& m, const PropagationConfig& cfg)
{
    const std::vector<int> idx = observed_indices(m);
    if (idx.empty())
        throw Error(Errc::EmptySample, "no observed keypoints to cluster");
    const int n = int(idx.size());
    const double w = std::max(m.width, 1), h = std::max(m.height, 1);
    const double diag = std::hypot(w, h);

    Eigen::MatrixXd feat(n, 4);
    std::set<std::pair<double, double>> distinct;
    for (int i = 0; i < n; ++i)
    {
        const auto p = m.keypoints.row(idx[i]);
        const auto u = m.displacements.row(idx[i]);
        feat.row(i) << p(0) / w, p(1) / h, cfg.motion_weight * u(0) / diag, cfg.motion_weight * u(1) / diag;
        distinct.insert({u(0), u(1)});
    }
    const int k = std::min<int>(cfg.k_homo, int(distinct.size()));

    // k-means++ seeding.
    std::mt19937_64 rng(cfg.seed);
    Eigen::MatrixXd centers(k, 4);
    centers.row(0) = feat.row(std::uniform_int_distribution<int>(0, n - 1)(rng));
    Eigen::VectorXd d2 = (feat.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c)
    {
        const double total = d2.sum();
        int pick = 0;
        if (total > 0)
        {
            double target = std::uniform_real_distribution<double>(0, total)(rng);
            for (pick = 0; pick < n - 1; ++pick)
            {
                target -= d2(pick);
                if (target < 0)
                    break;
            }
        }
        centers.row(c) = feat.row(pick);
        d2 = d2.cwiseMin((feat.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> label(n, -1);
    for (int it = 0; it < cfg.kmeans_iters; ++it)
    {
        bool changed = false;
        for (int i = 0; i < n; ++i)
        {
            Eigen::Index best;
            (centers.rowwise() - feat.row(i)).rowwise().squaredNorm().minCoeff(&best);
            if (label[i] != int(best))
            {
                label[i] = int(best);
                changed = true;
            }
        }
        if (!changed)
            break;
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, 4);
        Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < n; ++i)
        {
            sum.row(label[i]) += feat.row(i);
            count(label[i]) += 1;
        }
        for (int c = 0; c < k; ++c)
            if (count(c) > 0)
                centers.row(c) = sum.row(c) / count(c);
    }

    std::vector<HomographyCluster> out;
    for (int c = 0; c < k; ++c)
    {
        HomographyCluster cl;
        for (int i = 0; i < n; ++i)
            if (label[i] == c)
                cl.member_indices.push_back(idx[i]);
        if (cl.member_indices.empty())
            continue;
        cl.member_positions.resize(Eigen::Index(cl.member_indices.size()), 2);
        for (std::size_t j = 0; j < cl.member_indices.size(); ++j)
            cl.member_positions.row(Eigen::Index(j)) = m.keypoints.row(cl.member_indices[j]);
        cl.centroid = cl.member_positions.colwise().mean().transpose();
        cl.homography = Homography::identity();
        out.push_back(std::move(cl));
    }
    return out;
}

namespace
{

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// A fitted model must keep the frame corners in front of the camera.
bool usable_over_frame(const Homography& h, int width, int height)
{
    if (!h.m.allFinite())
        return false;
    const double s = h.m(2, 2) >= 0 ? 1.0 : -1.0;
    for (const Point2& c : {Point2(0, 0), Point2(width, 0), Point2(0, height), Point2(width, height)})
        if (s * (h.m.row(2).dot(c.homogeneous())) < 1e-6 * std::abs(h.m(2, 2)) || std::abs(h.m(2, 2)) < 1e-12)
            return false;
    return true;
}

}  // namespace

std::vector<HomographyCluster> fit_cluster_homographies(const MotionSample& m, std::vector<HomographyCluster> clusters,
                                                        const RansacConfig& ransac)
{
    for (std::size_t k = 0; k < clusters.size(); ++k)
    {
        auto& cl = clusters[k];
        const std::size_t n = cl.member_indices.size();
        std::vector<Correspondence> corrs;
        corrs.reserve(n);
        for (int i : cl.member_indices)
        {
            const Point2 p = m.keypoints.row(i).transpose();
            const Vec2 u = m.displacements.row(i).transpose();
            corrs.push_back({p, p - u, std::max(m.confidences(i), 1e-6)});
        }

        bool fitted = false;
        if (n >= 4)
        {
            RansacConfig rc = ransac;
            rc.seed = ransac.seed + k;
            try
            {
                const RansacResult res = estimate_homography_ransac(corrs, rc);
                if (usable_over_frame(res.h, m.width, m.height))
                {
                    cl.homography = res.h;
                    cl.inlier_fraction = double(res.inlier_count) / double(n);
                    fitted = true;
                }
            }
            catch (const Error&)
            {
            }
        }
        if (!fitted)
        {
            std::vector<double> us, vs;
            for (int i : cl.member_indices)
            {
                us.push_back(m.displacements(i, 0));
                vs.push_back(m.displacements(i, 1));
            }
            const Vec2 med(median(us), median(vs));
            cl.homography = Homography::translation(-med.x(), -med.y());
            std::size_t inliers = 0;
            for (int i : cl.member_indices)
                inliers += (m.displacements.row(i).transpose() - med).norm() <= ransac.inlier_threshold;
            cl.inlier_fraction = n ? double(inliers) / double(n) : 0.0;
        }
    }
    return clusters;
}

Eigen::MatrixXd fusion_weights(const std::vector<HomographyCluster>& clusters, const GridSpec& spec,
                               const PropagationConfig& cfg)
{
    const Eigen::Index nk = Eigen::Index(clusters.size());
    const double sigma = cfg.temperature(spec);
    Eigen::MatrixXd alpha(spec.size(), nk);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
        {
            const Point2 g = spec.vertex(r, c);
            const Eigen::Index v = Eigen::Index(r) * spec.cols + c;
            Eigen::VectorXd logits(nk);
            for (Eigen::Index k = 0; k < nk; ++k)
            {
                const auto& pts = clusters[std::size_t(k)].member_positions;
                const double d2 = pts.rows() ? (pts.rowwise() - g.transpose()).rowwise().squaredNorm().minCoeff()
                                             : std::numeric_limits<double>::infinity();
                logits(k) = -d2 / (2 * sigma * sigma);
            }
            const double top = logits.maxCoeff();
            Eigen::VectorXd e = std::isfinite(top) ? Eigen::VectorXd((logits.array() - top).exp())
                                                   : Eigen::VectorXd::Ones(nk);
            alpha.row(v) = (e / e.sum()).transpose();
        }
    return alpha;
}

GridMotionField fuse_grid_prior(const std::vector<HomographyCluster>& clusters, const GridSpec& spec,
                                const PropagationConfig& cfg)
{
    spec.validate();
    GridMotionField base(spec);
    if (clusters.empty())
        return base;
    const Eigen::MatrixXd alpha = fusion_weights(clusters, spec, cfg);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
        {
            const Point2 g = spec.vertex(r, c);
            const Eigen::Index v = base.vectors.index(r, c);
            Point2 blended = Point2::Zero();
            for (std::size_t k = 0; k < clusters.size(); ++k)
                blended += alpha(v, Eigen::Index(k)) * project(clusters[k].homography, g);
            base.vectors.data.row(v) = (g - blended).transpose();
        }
    return base;
}

namespace
{

double charbonnier(const Vec2& r, double eps)
{
    return std::sqrt(r.squaredNorm() + eps * eps);
}

void ensure_grad(Field2d* grad, const GridSpec& spec)
{
    if (grad && (grad->rows != spec.rows || grad->cols != spec.cols))
        *grad = Field2d(spec.rows, spec.cols);
}

}  // namespace

double loss_kp(const GridMotionField& dg, const MotionSample& m, double eps, Field2d* grad)
{
    ensure_grad(grad, dg.spec);
    const Eigen::Index n = m.size();
    if (n == 0)
        return 0.0;
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double w = m.confidences(i);
        if (w == 0)
            continue;
        const Point2 lp = dg.spec.to_lattice(m.keypoints.row(i).transpose());
        const BilinearStencil s = bilinear_stencil(dg.spec.rows, dg.spec.cols, lp.x(), lp.y());
        Vec2 pred = Vec2::Zero();
        for (int k = 0; k < 4; ++k)
            pred += s.weight[k] * dg.vectors.data.row(s.index[k]).transpose();
        const Vec2 r = m.displacements.row(i).transpose() - pred;
        const double c = charbonnier(r, eps);
        total += w * c;
        if (grad)
        {
            const Vec2 d = -w * r / (c * double(n));
            for (int k = 0; k < 4; ++k)
                grad->data.row(s.index[k]) += s.weight[k] * d.transpose();
        }
    }
    return total / double(n);
}

namespace
{

struct CellModel
{
    CellMapping mapping;
    std::array<Eigen::Index, 4> corner;
};

CellModel cell_model(const GridMotionField& dg, int r, int c)
{
    const GridSpec& spec = dg.spec;
    const std::array<Eigen::Index, 4> corner = {dg.vectors.index(r, c), dg.vectors.index(r, c + 1),
                                                dg.vectors.index(r + 1, c + 1), dg.vectors.index(r + 1, c)};
    const std::array<Point2, 4> rest = {spec.vertex(r, c), spec.vertex(r, c + 1), spec.vertex(r + 1, c + 1),
                                        spec.vertex(r + 1, c)};
    std::array<Point2, 4> moved;
    for (int k = 0; k < 4; ++k)
        moved[k] = rest[k] + dg.vectors.data.row(corner[k]).transpose();
    return {CellMapping(rest[0], Vec2(spec.step_x(), spec.step_y()), moved), corner};
}

}  // namespace

double loss_proj(const GridMotionField& dg, const MotionSample& m, double eps, Field2d* grad)
{
    ensure_grad(grad, dg.spec);
    const Eigen::Index n = m.size();
    if (n == 0)
        return 0.0;
    const GridSpec& spec = dg.spec;
    std::vector<std::optional<CellModel>> cells(std::size_t(spec.rows - 1) * (spec.cols - 1));

    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double w = m.confidences(i);
        if (w == 0)
            continue;
        const Point2 p = m.keypoints.row(i).transpose();
        const Point2 lp = spec.to_lattice(p);
        const int c = std::clamp(int(std::floor(lp.x())), 0, spec.cols - 2);
        const int r = std::clamp(int(std::floor(lp.y())), 0, spec.rows - 2);
        auto& slot = cells[std::size_t(r) * (spec.cols - 1) + c];
        if (!slot)
            slot = cell_model(dg, r, c);
        const CellModel& cell = *slot;

        const Vec2 u = m.displacements.row(i).transpose();
        if (cell.mapping.ok())
        {
            const Vec2 pred = cell.mapping.map(p) - p;
            const Vec2 res = u - pred;
            const double ch = charbonnier(res, eps);
            total += w * ch;
            if (grad)
            {
                const Vec2 d = -w * res / (ch * double(n));
                const Eigen::Matrix<double, 1, 8> g = d.transpose() * cell.mapping.jacobian(p);
                for (int k = 0; k < 4; ++k)
                {
                    grad->data(cell.corner[k], 0) += g(2 * k);
                    grad->data(cell.corner[k], 1) += g(2 * k + 1);
                }
            }
        }
        else
        {
            // Collapsed cell: bilinear displacement stands in for the homography.
            const BilinearStencil s = bilinear_stencil(spec.rows, spec.cols, lp.x(), lp.y());
            Vec2 pred = Vec2::Zero();
            for (int k = 0; k < 4; ++k)
                pred += s.weight[k] * dg.vectors.data.row(s.index[k]).transpose();
            const Vec2 res = u - pred;
            const double ch = charbonnier(res, eps);
            total += w * ch;
            if (grad)
            {
                const Vec2 d = -w * res / (ch * double(n));
                for (int k = 0; k < 4; ++k)
                    grad->data.row(s.index[k]) += s.weight[k] * d.transpose();
            }
        }
    }
    return total / double(n);
}

double loss_struct(const GridSpec& spec, const GridMotionField& dg, StructureForm form, Field2d* grad)
{
    ensure_grad(grad, spec);
    const Pairsd P = dg.deformed();
    const int cells = (spec.rows - 1) * (spec.cols - 1);
    double total = 0;
    for (int r = 0; r < spec.rows - 1; ++r)
        for (int c = 0; c < spec.cols - 1; ++c)
        {
            const Eigen::Index a = dg.vectors.index(r, c);
            const Eigen::Index right = dg.vectors.index(r, c + 1);
            const Eigen::Index down = dg.vectors.index(r + 1, c);
            const Vec2 e1 = (P.row(right) - P.row(a)).transpose();
            const Vec2 e2 = (P.row(down) - P.row(a)).transpose();
            const double n1 = e1.squaredNorm(), n2 = e2.squaredNorm();
            if (n1 < 1e-24 || n2 < 1e-24)
            {
                total += 1.0;
                continue;
            }
            const double d = e1.dot(e2);
            const double cos2 = d * d / (n1 * n2);
            total += form == StructureForm::Orthogonality ? cos2 : 1.0 - cos2;
            if (grad)
            {
                const double sign = form == StructureForm::Orthogonality ? 1.0 : -1.0;
                const Vec2 g1 = sign * (2 * d * e2 / (n1 * n2) - 2 * d * d * e1 / (n1 * n1 * n2)) / cells;
                const Vec2 g2 = sign * (2 * d * e1 / (n1 * n2) - 2 * d * d * e2 / (n1 * n2 * n2)) / cells;
                grad->data.row(right) += g1.transpose();
                grad->data.row(down) += g2.transpose();
                grad->data.row(a) -= (g1 + g2).transpose();
            }
        }
    return total / cells;
}

double propagation_objective(const GridMotionField& dg, const MotionSample& m, const PropagationConfig& cfg,
                             Field2d* grad)
{
    ensure_grad(grad, dg.spec);
    if (grad)
        grad->data.setZero();
    Field2d gk, gp, gs;
    double total = 0;
    if (cfg.lambda_kp > 0)
    {
        total += cfg.lambda_kp * loss_kp(dg, m, cfg.charbonnier_eps, grad ? &gk : nullptr);
        if (grad)
            grad->data += cfg.lambda_kp * gk.data;
    }
    if (cfg.lambda_proj > 0)
    {
        total += cfg.lambda_proj * loss_proj(dg, m, cfg.charbonnier_eps, grad ? &gp : nullptr);
        if (grad)
            grad->data += cfg.lambda_proj * gp.data;
    }
    if (cfg.lambda_struct > 0)
    {
        total += cfg.lambda_struct * loss_struct(dg.spec, dg, cfg.structure_form, grad ? &gs : nullptr);
        if (grad)
            grad->data += cfg.lambda_struct * gs.data;
    }
    return total;
}

GridMotionField solve_residual(const MotionSample& m, const GridMotionField& base, const PropagationConfig& cfg)
{
    GridMotionField res(base.spec, base.frame_index);
    if (cfg.residual_iters == 0 || m.empty())
        return res;

    GridMotionField cur = base;
    Field2d grad;
    double loss = propagation_objective(cur, m, cfg, &grad);
    double step = cfg.residual_step;
    for (int it = 0; it < cfg.residual_iters; ++it)
    {
        const double gmax = grad.data.cwiseAbs().maxCoeff();
        if (!(gmax > 1e-9))
            break;
        GridMotionField trial = cur;
        trial.vectors.data -= (step / gmax) * grad.data;
        const double trial_loss = propagation_objective(trial, m, cfg);
        if (trial_loss < loss)
        {
            cur = std::move(trial);
            loss = propagation_objective(cur, m, cfg, &grad);
        }
        else
        {
            step *= 0.5;
        }
    }
    res.vectors.data = cur.vectors.data - base.vectors.data;
    return res;
}

PropagationResult propagate_detailed(const MotionSample& m, const GridSpec& spec, const PropagationConfig& cfg,
                                     const RansacConfig& ransac)
{
    spec.validate();
    PropagationResult out;
    out.base = GridMotionField(spec, m.frame_index);
    out.residual = out.base;
    out.field = out.base;
    if (observed_indices(m).empty())
        return out;
    out.clusters = fit_cluster_homographies(m, cluster_displacements(m, cfg), ransac);
    out.base = fuse_grid_prior(out.clusters, spec, cfg);
    out.base.frame_index = m.frame_index;
    out.residual = solve_residual(m, out.base, cfg);
    out.field = out.base;
    out.field.vectors.data += out.residual.vectors.data;
    return out;
}

GridMotionField propagate(const MotionSample& m, const GridSpec& spec, const PropagationConfig& cfg,
                          const RansacConfig& ransac)
{
    return propagate_detailed(m, spec, cfg, ransac).field;
}

void write_grid_dump(std::ostream& out, const GridMotionField& dg)
{
    for (int r = 0; r < dg.spec.rows; ++r)
        for (int c = 0; c < dg.spec.cols; ++c)
            out << dg.frame_index << ',' << r << ',' << c << ',' << dg.vectors.at(r, c)(0) << ','
                << dg.vectors.at(r, c)(1) << '\n';
}

}  // namespace causalstab
