#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "causalstab/geometry.hpp"
#include "causalstab/observer.hpp"

namespace causalstab
{

/// Regular vertex lattice spanning the frame, borders included.
struct GridSpec
{
    int rows = 16;
    int cols = 16;
    int frame_width = 0;
    int frame_height = 0;

    double step_x() const { return double(frame_width - 1) / (cols - 1); }
    double step_y() const { return double(frame_height - 1) / (rows - 1); }
    Point2 vertex(int r, int c) const { return {c * step_x(), r * step_y()}; }
    /// Pixel position to lattice coordinates (x in [0, cols-1], y in [0, rows-1]).
    Point2 to_lattice(const Point2& p) const { return {p.x() / step_x(), p.y() / step_y()}; }
    Eigen::Index size() const { return Eigen::Index(rows) * cols; }
    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

/// Per-vertex displacement, same direction convention as FlowField.
struct GridMotionField
{
    GridSpec spec;
    Field2d vectors;
    int frame_index = 0;

    GridMotionField() = default;
    explicit GridMotionField(const GridSpec& s, int index = 0) : spec(s), vectors(s.rows, s.cols), frame_index(index) {}

    Vec2 sample(const Point2& pixel) const { return bilinear_sample(vectors, spec.to_lattice(pixel)); }
    /// Vertex positions after adding the displacement.
    Pairsd deformed() const;
};

struct HomographyCluster
{
    Homography homography;
    std::vector<int> member_indices;
    Pairsd member_positions;
    Point2 centroid = Point2::Zero();
    double inlier_fraction = 0.0;
};

enum class StructureForm
{
    /// (e1.e2)^2 / (|e1|^2 |e2|^2): zero on an undeformed grid.
    Orthogonality,
    /// Rotated-edge form, equal to one minus the orthogonality value.
    Literal,
};

struct PropagationConfig
{
    int k_homo = 2;
    int kmeans_iters = 50;
    /// Scale on the displacement features relative to the normalised positions.
    double motion_weight = 40.0;
    std::uint64_t seed = 0;
    /// Softmax temperature in pixels; <= 0 selects one grid-cell diagonal.
    double fusion_temperature = 0.0;
    int residual_iters = 30;
    double residual_step = 0.5;
    double lambda_kp = 10.0;
    double lambda_proj = 40.0;
    double lambda_struct = 40.0;
    double charbonnier_eps = 1e-3;
    StructureForm structure_form = StructureForm::Orthogonality;

    double temperature(const GridSpec& spec) const;
    void validate() const;
};

/// K-means over (x/W, y/H, w*u/diag, w*v/diag) of the keypoints with positive confidence.
/// Homographies are left as identity.
std::vector<HomographyCluster> cluster_displacements(const MotionSample& m, const PropagationConfig& cfg);

/// RANSAC homography per cluster mapping p to its source position p - u_p; clusters with
/// fewer than four members or no consensus fall back to a translation by the member median.
std::vector<HomographyCluster> fit_cluster_homographies(const MotionSample& m, std::vector<HomographyCluster> clusters,
                                                        const RansacConfig& ransac);

/// Distance-softmax blend of the cluster homographies at each vertex; base = g - blended(g).
GridMotionField fuse_grid_prior(const std::vector<HomographyCluster>& clusters, const GridSpec& spec,
                                const PropagationConfig& cfg);

/// Blend weights (rows = vertices, cols = clusters).
Eigen::MatrixXd fusion_weights(const std::vector<HomographyCluster>& clusters, const GridSpec& spec,
                               const PropagationConfig& cfg);

/// Confidence-weighted Charbonnier keypoint loss. `grad`, when given, receives dL/d(vectors).
double loss_kp(const GridMotionField& dg, const MotionSample& m, double eps, Field2d* grad = nullptr);

/// Charbonnier loss between u_p and the displacement predicted by the cell homography through
/// the four displaced corners of the enclosing cell.
double loss_proj(const GridMotionField& dg, const MotionSample& m, double eps, Field2d* grad = nullptr);

/// Mean edge-orthogonality penalty over the cells of the deformed grid.
double loss_struct(const GridSpec& spec, const GridMotionField& dg, StructureForm form = StructureForm::Orthogonality,
                   Field2d* grad = nullptr);

/// Weighted sum of the three losses.
double propagation_objective(const GridMotionField& dg, const MotionSample& m, const PropagationConfig& cfg,
                             Field2d* grad = nullptr);

/// Residual minimising the objective at base + residual by normalised gradient descent.
GridMotionField solve_residual(const MotionSample& m, const GridMotionField& base, const PropagationConfig& cfg);

struct PropagationResult
{
    GridMotionField base;
    GridMotionField residual;
    GridMotionField field;
    std::vector<HomographyCluster> clusters;
};

PropagationResult propagate_detailed(const MotionSample& m, const GridSpec& spec, const PropagationConfig& cfg,
                                     const RansacConfig& ransac);

GridMotionField propagate(const MotionSample& m, const GridSpec& spec, const PropagationConfig& cfg,
                          const RansacConfig& ransac);

/// `frame,row,col,dx,dy` per vertex.
void write_grid_dump(std::ostream& out, const GridMotionField& dg);

}  // namespace causalstab
