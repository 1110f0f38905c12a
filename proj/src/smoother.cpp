#include "causalstab/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

namespace causalstab
{

SmootherConfig SmootherConfig::profile(LossProfile p)
{
    SmootherConfig cfg;
    if (p == LossProfile::Core)
    {
        cfg.lambda_time = 1.0;
        cfg.lambda_freq = 0.1;
        cfg.lambda_spatial = 0.0;
        cfg.lambda_proj = 0.0;
        cfg.gamma0 = 0.1;
    }
    return cfg;
}

std::string profile_name(LossProfile p)
{
    return p == LossProfile::Core ? "core" : "appendix";
}

LossProfile parse_profile(const std::string& name)
{
    if (name == "core")
        return LossProfile::Core;
    if (name == "appendix")
        return LossProfile::Appendix;
    throw Error(Errc::ConfigError, "unknown smoother profile '" + name + "'");
}

void SmootherConfig::validate() const
{
    auto fail = [](const std::string& key, const char* what) {
        throw Error(Errc::ConfigError, "smoother." + key + " " + what);
    };
    if (!(lambda_blend > 0))
        fail("lambda_blend", "must be positive");
    if (window < 3)
        fail("window", "must be >= 3");
    if (!(tau_time > 0))
        fail("tau_time", "must be positive");
    if (!(beta >= 0))
        fail("beta", "must be >= 0");
    if (!(gamma0 >= 0))
        fail("gamma0", "must be >= 0");
    for (auto [v, key] : {std::pair{lambda_time, "lambda_time"}, {lambda_freq, "lambda_freq"},
                          {lambda_spatial, "lambda_spatial"}, {lambda_proj, "lambda_proj"},
                          {lambda_edge, "lambda_edge"}, {lambda_angle, "lambda_angle"}})
        if (!(v >= 0))
            fail(key, "must be >= 0");
    if (!(charbonnier_eps > 0))
        fail("charbonnier_eps", "must be positive");
    if (!(tap_bound > 0))
        fail("tap_bound", "must be positive");
    if (kernel_iters < 0)
        fail("kernel_iters", "must be >= 0");
    if (!(kernel_step > 0))
        fail("kernel_step", "must be positive");
}

Eigen::VectorXd temporal_weights(int delta_max, double tau)
{
    Eigen::VectorXd a(std::max(delta_max, 0));
    for (int d = 1; d <= delta_max; ++d)
        a(d - 1) = std::exp(-d / tau);
    return delta_max > 0 ? Eigen::VectorXd(a / a.sum()) : a;
}

Eigen::VectorXd frequency_weights(int window, double gamma0)
{
    Eigen::VectorXd g(window / 2);
    for (int m = 1; m <= window / 2; ++m)
    {
        const double ratio = (2.0 * std::numbers::pi * m / window) / std::numbers::pi;
        g(m - 1) = gamma0 * ratio * ratio;
    }
    return g;
}

namespace
{

Pairsd rest_positions(const GridSpec& spec)
{
    Pairsd p(spec.size(), 2);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            p.row(Eigen::Index(r) * spec.cols + c) = spec.vertex(r, c).transpose();
    return p;
}

}  // namespace

TrajectoryBuffer::TrajectoryBuffer(const GridSpec& s, int w) : spec(s), window(w), rest(rest_positions(s))
{
    spec.validate();
}

KernelSet KernelSet::zeros(KernelScope scope, Eigen::Index vertices)
{
    KernelSet k;
    k.scope = scope;
    k.taps.setZero(scope == KernelScope::Global ? 1 : vertices, 6);
    return k;
}

void append_and_integrate(TrajectoryBuffer& buf, const GridMotionField& dg)
{
    if (!(dg.spec == buf.spec))
        throw Error(Errc::SpecMismatch, "motion field grid does not match the trajectory buffer");
    if (buf.raw.empty())
        buf.raw.push_back(buf.rest);
    else
        buf.raw.push_back(buf.raw.back() + dg.vectors.data);
    while (int(buf.raw.size()) > buf.window)
        buf.raw.pop_front();
    ++buf.t;
}

Pairsd smooth_step(const TrajectoryBuffer& buf, const KernelSet& kernels, double lambda_blend)
{
    const Pairsd& O = buf.latest_raw();
    const int lags = std::min(3, buf.history());
    if (lags == 0)
        return O;
    Pairsd S(O.rows(), 2);
    for (Eigen::Index v = 0; v < O.rows(); ++v)
    {
        const auto k = kernels.row(v);
        for (int a = 0; a < 2; ++a)
        {
            double num = O(v, a), den = 1.0;
            for (int r = 1; r <= lags; ++r)
            {
                const double tap = k(3 * a + r - 1);
                num += lambda_blend * tap * buf.past(r)(v, a);
                den += lambda_blend * std::abs(tap);
            }
            S(v, a) = num / den;
        }
    }
    return S;
}

StateWindow candidate_window(const TrajectoryBuffer& buf, const Pairsd& candidate)
{
    StateWindow w{&candidate};
    const int keep = std::min(buf.history(), buf.window - 1);
    for (int lag = 1; lag <= keep; ++lag)
        w.push_back(&buf.past(lag));
    return w;
}

double loss_time(const StateWindow& s, const SmootherConfig& cfg, double beta, Pairsd* grad, double* dbeta)
{
    const Pairsd& St = *s[0];
    const Eigen::Index n = St.rows();
    if (grad)
        grad->setZero(n, 2);
    if (dbeta)
        *dbeta = 0;
    const int dmax = std::min(cfg.delta_max(), int(s.size() - 1) / 2);
    if (dmax < 1 || n == 0)
        return 0.0;
    const Eigen::VectorXd alpha = temporal_weights(dmax, cfg.tau_time);
    const double eps2 = cfg.charbonnier_eps * cfg.charbonnier_eps;

    double total = 0;
    for (int d = 1; d <= dmax; ++d)
    {
        const double w = alpha(d - 1) / double(d * d);
        const Pairsd& S1 = *s[std::size_t(d)];
        const Pairsd& S2 = *s[std::size_t(2 * d)];
        for (Eigen::Index v = 0; v < n; ++v)
        {
            const Vec2 a = (St.row(v) - S1.row(v)).transpose();
            const Vec2 c = (St.row(v) - 2 * S1.row(v) + S2.row(v)).transpose();
            const double e = std::exp(-beta * a.squaredNorm());
            const double ch = std::sqrt(c.squaredNorm() + eps2);
            total += w * e * ch;
            if (grad)
                grad->row(v) += (w * e * (c / ch - 2 * beta * ch * a)).transpose();
            if (dbeta)
                *dbeta -= w * e * ch * a.squaredNorm();
        }
    }
    if (grad)
        *grad /= double(n);
    if (dbeta)
        *dbeta /= double(n);
    return total / double(n);
}

namespace
{

// Residual-maker column for a least-squares line fit over L samples: (I - P) e_0.
Eigen::VectorXd detrend_column(int L)
{
    Eigen::MatrixXd A(L, 2);
    for (int d = 0; d < L; ++d)
        A.row(d) << 1.0, double(d);
    const Eigen::MatrixXd P = A * (A.transpose() * A).inverse() * A.transpose();
    return (Eigen::MatrixXd::Identity(L, L) - P).col(0);
}

}  // namespace

double loss_freq(const StateWindow& s, const Pairsd& rest, const SmootherConfig& cfg, Pairsd* grad)
{
    const int L = cfg.window;
    const Eigen::Index n = rest.rows();
    if (grad)
        grad->setZero(n, 2);
    if (n == 0)
        return 0.0;
    const Eigen::VectorXd gamma = frequency_weights(L, cfg.gamma0);
    const int bins = int(gamma.size());

    std::vector<std::vector<std::complex<double>>> basis(static_cast<std::size_t>(bins), std::vector<std::complex<double>>(L));
    for (int m = 1; m <= bins; ++m)
        for (int d = 0; d < L; ++d)
            basis[std::size_t(m - 1)][std::size_t(d)] = std::polar(1.0, -2.0 * std::numbers::pi * m * d / L);

    // d X'_m / d x_0, with and without the linear detrend.
    std::vector<std::complex<double>> dx0(std::size_t(bins), 1.0);
    Eigen::MatrixXd P;
    if (cfg.detrend)
    {
        const Eigen::VectorXd col = detrend_column(L);
        for (int m = 0; m < bins; ++m)
        {
            std::complex<double> acc = 0;
            for (int d = 0; d < L; ++d)
                acc += col(d) * basis[std::size_t(m)][std::size_t(d)];
            dx0[std::size_t(m)] = acc;
        }
        Eigen::MatrixXd A(L, 2);
        for (int d = 0; d < L; ++d)
            A.row(d) << 1.0, double(d);
        P = Eigen::MatrixXd::Identity(L, L) - A * (A.transpose() * A).inverse() * A.transpose();
    }

    double total = 0;
    Eigen::VectorXd x(L);
    for (Eigen::Index v = 0; v < n; ++v)
        for (int a = 0; a < 2; ++a)
        {
            for (int d = 0; d < L; ++d)
                x(d) = d < int(s.size()) ? (*s[std::size_t(d)])(v, a) - rest(v, a) : 0.0;
            if (cfg.detrend)
                x = P * x;
            for (int m = 0; m < bins; ++m)
            {
                std::complex<double> X = 0;
                for (int d = 0; d < L; ++d)
                    X += x(d) * basis[std::size_t(m)][std::size_t(d)];
                total += gamma(m) * std::norm(X);
                if (grad)
                    (*grad)(v, a) += 2.0 * gamma(m) * std::real(std::conj(X) * dx0[std::size_t(m)]);
            }
        }
    if (grad)
        *grad /= double(n);
    return total / double(n);
}

namespace
{

struct Triangle
{
    std::array<Eigen::Index, 3> v;
    std::array<double, 3> rest_len;
    std::array<double, 3> rest_angle;
};

double angle_at(const Vec2& u, const Vec2& w)
{
    return std::atan2(std::abs(u.x() * w.y() - u.y() * w.x()), u.dot(w));
}

// Eight triangles per cell: each corner anchors one triangle per side neighbour, closed by the opposite corner.
std::vector<Triangle> build_triangles(const GridSpec& spec, const Pairsd& rest)
{
    std::vector<Triangle> tris;
    for (int r = 0; r + 1 < spec.rows; ++r)
        for (int c = 0; c + 1 < spec.cols; ++c)
        {
            const std::array<Eigen::Index, 4> q = {Eigen::Index(r) * spec.cols + c, Eigen::Index(r) * spec.cols + c + 1,
                                                   Eigen::Index(r + 1) * spec.cols + c + 1,
                                                   Eigen::Index(r + 1) * spec.cols + c};
            for (int a = 0; a < 4; ++a)
                for (int side : {1, 3})
                {
                    Triangle t;
                    t.v = {q[std::size_t(a)], q[std::size_t((a + side) % 4)], q[std::size_t((a + 2) % 4)]};
                    for (int k = 0; k < 3; ++k)
                    {
                        const Vec2 p0 = rest.row(t.v[std::size_t(k)]).transpose();
                        const Vec2 p1 = rest.row(t.v[std::size_t((k + 1) % 3)]).transpose();
                        const Vec2 p2 = rest.row(t.v[std::size_t((k + 2) % 3)]).transpose();
                        t.rest_len[std::size_t(k)] = (p1 - p0).norm();
                        t.rest_angle[std::size_t(k)] = angle_at(p1 - p0, p2 - p0);
                    }
                    tris.push_back(t);
                }
        }
    return tris;
}

}  // namespace

double loss_spatial(const GridSpec& spec, const Pairsd& positions, const SmootherConfig& cfg, Pairsd* grad)
{
    const Pairsd rest = rest_positions(spec);
    if (grad)
        grad->setZero(positions.rows(), 2);
    const std::vector<Triangle> tris = build_triangles(spec, rest);
    const double cells = double(spec.rows - 1) * (spec.cols - 1);
    const double eps2 = cfg.charbonnier_eps * cfg.charbonnier_eps;

    double total = 0;
    for (const Triangle& t : tris)
        for (int k = 0; k < 3; ++k)
        {
            const Eigen::Index i0 = t.v[std::size_t(k)], i1 = t.v[std::size_t((k + 1) % 3)],
                               i2 = t.v[std::size_t((k + 2) % 3)];
            const Vec2 u = (positions.row(i1) - positions.row(i0)).transpose();
            const Vec2 w = (positions.row(i2) - positions.row(i0)).transpose();

            // Edge i0 -> i1.
            const double len = u.norm();
            const double er = len / t.rest_len[std::size_t(k)] - 1.0;
            const double ech = std::sqrt(er * er + eps2);
            total += cfg.lambda_edge * ech;
            if (grad && len > 0)
            {
                const Vec2 g = cfg.lambda_edge * (er / ech) / t.rest_len[std::size_t(k)] * u / len;
                grad->row(i1) += g.transpose();
                grad->row(i0) -= g.transpose();
            }

            // Angle at i0.
            const double cr = u.x() * w.y() - u.y() * w.x();
            const double dt = u.dot(w);
            const double theta = std::atan2(std::abs(cr), dt);
            const double ar = theta / t.rest_angle[std::size_t(k)] - 1.0;
            const double ach = std::sqrt(ar * ar + eps2);
            total += cfg.lambda_angle * ach;
            const double den = cr * cr + dt * dt;
            if (grad && den > 1e-24)
            {
                const double sc = cr >= 0 ? 1.0 : -1.0;
                const Vec2 dcr_du(w.y(), -w.x()), dcr_dw(-u.y(), u.x());
                const Vec2 dth_du = (dt * sc * dcr_du - std::abs(cr) * w) / den;
                const Vec2 dth_dw = (dt * sc * dcr_dw - std::abs(cr) * u) / den;
                const double f = cfg.lambda_angle * (ar / ach) / t.rest_angle[std::size_t(k)];
                grad->row(i1) += f * dth_du.transpose();
                grad->row(i2) += f * dth_dw.transpose();
                grad->row(i0) -= f * (dth_du + dth_dw).transpose();
            }
        }
    if (grad)
        *grad /= cells;
    return total / cells;
}

namespace
{

struct CellWarp
{
    std::array<Eigen::Index, 4> corner;
    std::array<double, 4> bilinear;
    std::optional<CellMapping> mapping;
};

CellWarp cell_warp(const GridSpec& spec, const Pairsd& positions, const Point2& p)
{
    const Point2 lp = spec.to_lattice(p);
    const int c = std::clamp(int(std::floor(lp.x())), 0, spec.cols - 2);
    const int r = std::clamp(int(std::floor(lp.y())), 0, spec.rows - 2);
    CellWarp w;
    w.corner = {Eigen::Index(r) * spec.cols + c, Eigen::Index(r) * spec.cols + c + 1,
                Eigen::Index(r + 1) * spec.cols + c + 1, Eigen::Index(r + 1) * spec.cols + c};
    const double fx = std::clamp(lp.x() - c, 0.0, 1.0), fy = std::clamp(lp.y() - r, 0.0, 1.0);
    w.bilinear = {(1 - fx) * (1 - fy), fx * (1 - fy), fx * fy, (1 - fx) * fy};
    std::array<Point2, 4> corners;
    for (int k = 0; k < 4; ++k)
        corners[std::size_t(k)] = positions.row(w.corner[std::size_t(k)]).transpose();
    CellMapping mapping(spec.vertex(r, c), Vec2(spec.step_x(), spec.step_y()), corners);
    if (mapping.ok())
        w.mapping = mapping;
    return w;
}

Point2 apply_warp(const CellWarp& w, const Pairsd& positions, const Point2& p)
{
    if (w.mapping)
        return w.mapping->map(p);
    Point2 q = Point2::Zero();
    for (int k = 0; k < 4; ++k)
        q += w.bilinear[std::size_t(k)] * positions.row(w.corner[std::size_t(k)]).transpose();
    return q;
}

}  // namespace

double loss_proj_smooth(const GridSpec& spec, const Pairsd& smoothed, const Pairsd& raw, const MotionSample& m,
                        double eps, Pairsd* grad)
{
    if (grad)
        grad->setZero(smoothed.rows(), 2);
    const Eigen::Index n = m.size();
    if (n == 0)
        return 0.0;
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double w = m.confidences(i);
        if (w == 0)
            continue;
        const Point2 p = m.keypoints.row(i).transpose();
        const CellWarp wo = cell_warp(spec, raw, p);
        const CellWarp ws = cell_warp(spec, smoothed, p);
        const Vec2 r = apply_warp(wo, raw, p) - apply_warp(ws, smoothed, p);
        const double rho = std::sqrt(r.squaredNorm() + eps * eps);
        total += w * rho;
        if (grad)
        {
            const Vec2 d = -w * r / (rho * double(n));
            if (ws.mapping)
            {
                const Eigen::Matrix<double, 1, 8> g = d.transpose() * ws.mapping->jacobian(p);
                for (int k = 0; k < 4; ++k)
                {
                    (*grad)(ws.corner[std::size_t(k)], 0) += g(2 * k);
                    (*grad)(ws.corner[std::size_t(k)], 1) += g(2 * k + 1);
                }
            }
            else
            {
                for (int k = 0; k < 4; ++k)
                    grad->row(ws.corner[std::size_t(k)]) += ws.bilinear[std::size_t(k)] * d.transpose();
            }
        }
    }
    return total / double(n);
}

namespace
{

ObjectiveTerms evaluate(const TrajectoryBuffer& buf, const Pairsd& S, const MotionSample& m,
                        const SmootherConfig& cfg, double beta, Pairsd* dS, double* dbeta)
{
    ObjectiveTerms t;
    const StateWindow win = candidate_window(buf, S);
    Pairsd g;
    if (dS)
        dS->setZero(S.rows(), 2);
    if (dbeta)
        *dbeta = 0;
    if (cfg.lambda_time > 0)
    {
        double db = 0;
        t.time = loss_time(win, cfg, beta, dS ? &g : nullptr, dbeta ? &db : nullptr);
        if (dS)
            *dS += cfg.lambda_time * g;
        if (dbeta)
            *dbeta += cfg.lambda_time * db;
    }
    if (cfg.lambda_freq > 0)
    {
        t.freq = loss_freq(win, buf.rest, cfg, dS ? &g : nullptr);
        if (dS)
            *dS += cfg.lambda_freq * g;
    }
    if (cfg.lambda_spatial > 0)
    {
        t.spatial = loss_spatial(buf.spec, S, cfg, dS ? &g : nullptr);
        if (dS)
            *dS += cfg.lambda_spatial * g;
    }
    if (cfg.lambda_proj > 0 && !m.empty())
    {
        t.proj = loss_proj_smooth(buf.spec, S, buf.latest_raw(), m, cfg.charbonnier_eps, dS ? &g : nullptr);
        if (dS)
            *dS += cfg.lambda_proj * g;
    }
    t.total = cfg.lambda_time * t.time + cfg.lambda_freq * t.freq + cfg.lambda_spatial * t.spatial +
              cfg.lambda_proj * t.proj;
    return t;
}

double softplus_inverse(double beta)
{
    return beta > 30 ? beta : std::log(std::expm1(std::max(beta, 1e-300)));
}

double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

ObjectiveTerms smoother_objective(const TrajectoryBuffer& buf, const KernelSet& kernels, const MotionSample& m,
                                  const SmootherConfig& cfg)
{
    const Pairsd S = smooth_step(buf, kernels, cfg.lambda_blend);
    return evaluate(buf, S, m, cfg, kernels.beta, nullptr, nullptr);
}

double smoother_objective_grad(const TrajectoryBuffer& buf, const KernelSet& kernels, const MotionSample& m,
                               const SmootherConfig& cfg, KernelSet& grad)
{
    const Pairsd S = smooth_step(buf, kernels, cfg.lambda_blend);
    Pairsd dS;
    double dbeta = 0;
    const double total = evaluate(buf, S, m, cfg, kernels.beta, &dS, cfg.optimize_beta ? &dbeta : nullptr).total;

    grad = KernelSet::zeros(kernels.scope, kernels.taps.rows());
    grad.beta = dbeta;
    const int lags = std::min(3, buf.history());
    const double lam = cfg.lambda_blend;
    for (Eigen::Index v = 0; v < S.rows(); ++v)
    {
        const auto k = kernels.row(v);
        const Eigen::Index gr = kernels.scope == KernelScope::Global ? 0 : v;
        for (int a = 0; a < 2; ++a)
        {
            double den = 1.0;
            for (int r = 1; r <= lags; ++r)
                den += lam * std::abs(k(3 * a + r - 1));
            for (int r = 1; r <= lags; ++r)
            {
                // Right derivative at zero.
                const double sgn = k(3 * a + r - 1) >= 0 ? 1.0 : -1.0;
                const double dSdk = lam * (buf.past(r)(v, a) - S(v, a) * sgn) / den;
                grad.taps(gr, 3 * a + r - 1) += dS(v, a) * dSdk;
            }
        }
    }
    return total;
}

namespace
{

KernelSet descend(const TrajectoryBuffer& buf, const MotionSample& m, const SmootherConfig& cfg, const KernelSet& init,
                  double& final_loss)
{
    KernelSet cur = init;
    cur.taps = cur.taps.cwiseMax(-cfg.tap_bound).cwiseMin(cfg.tap_bound);
    KernelSet grad;
    double loss = smoother_objective_grad(buf, cur, m, cfg, grad);
    double step = cfg.kernel_step;
    for (int it = 0; it < cfg.kernel_iters; ++it)
    {
        // Projected gradient: components pushing against an active bound do not count.
        auto g = grad.taps;
        for (Eigen::Index i = 0; i < g.size(); ++i)
        {
            const double k = cur.taps.data()[i];
            if ((k <= -cfg.tap_bound && g.data()[i] > 0) || (k >= cfg.tap_bound && g.data()[i] < 0))
                g.data()[i] = 0;
        }
        const double gb = cfg.optimize_beta ? grad.beta * sigmoid(softplus_inverse(cur.beta)) : 0.0;
        const double gmax = std::max(g.cwiseAbs().maxCoeff(), std::abs(gb));
        if (!(gmax > 1e-10))
            break;
        KernelSet trial = cur;
        trial.taps = (cur.taps - (step / gmax) * g).cwiseMax(-cfg.tap_bound).cwiseMin(cfg.tap_bound);
        if (cfg.optimize_beta)
        {
            const double b = softplus_inverse(cur.beta) - (step / gmax) * gb;
            trial.beta = b > 30 ? b : std::log1p(std::exp(b));
        }
        const double trial_loss = smoother_objective(buf, trial, m, cfg).total;
        if (trial_loss < loss)
        {
            cur = std::move(trial);
            loss = smoother_objective_grad(buf, cur, m, cfg, grad);
        }
        else
        {
            step *= 0.5;
        }
    }
    final_loss = loss;
    return cur;
}

}  // namespace

KernelSet solve_kernels(const TrajectoryBuffer& buf, const MotionSample& m, const SmootherConfig& cfg,
                        const KernelSet& init)
{
    if (cfg.kernel_iters == 0 || buf.history() == 0)
        return init;
    double best_loss = 0;
    KernelSet best = descend(buf, m, cfg, init, best_loss);
    if (!cfg.kernel_restarts)
        return best;
    for (double level : {0.0, 0.5 * cfg.tap_bound, cfg.tap_bound})
    {
        KernelSet start = init;
        start.taps.setConstant(level);
        double loss = 0;
        KernelSet candidate = descend(buf, m, cfg, start, loss);
        if (loss < best_loss)
        {
            best_loss = loss;
            best = std::move(candidate);
        }
    }
    return best;
}

TrajectorySmoother::TrajectorySmoother(const GridSpec& spec, const SmootherConfig& cfg)
    : cfg_(cfg), buf_(spec, cfg.window), kernels_(KernelSet::zeros(cfg.scope, spec.size()))
{
    cfg_.validate();
    kernels_.beta = cfg.beta;
}

SmoothedFrame TrajectorySmoother::step(const GridMotionField& dg, const MotionSample& m)
{
    append_and_integrate(buf_, dg);
    kernels_ = solve_kernels(buf_, m, cfg_, kernels_);
    Pairsd S = smooth_step(buf_, kernels_, cfg_.lambda_blend);
    buf_.smoothed.push_back(S);
    while (int(buf_.smoothed.size()) > buf_.window)
        buf_.smoothed.pop_front();
    return {std::move(S), buf_.latest_raw(), kernels_};
}

void write_trajectory_dump(std::ostream& out, int frame, const GridSpec& spec, const Pairsd& raw,
                           const Pairsd& smoothed)
{
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
        {
            const Eigen::Index v = Eigen::Index(r) * spec.cols + c;
            out << frame << ',' << r << ',' << c << ',' << raw(v, 0) << ',' << raw(v, 1) << ',' << smoothed(v, 0)
                << ',' << smoothed(v, 1) << '\n';
        }
}

}  // namespace causalstab
