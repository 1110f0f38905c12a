#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "causalstab/geometry.hpp"
#include "causalstab/image.hpp"

namespace causalstab
{

enum class Detector
{
    ShiTomasi,
    Fast9,
};

std::string detector_name(Detector d);
Detector parse_detector(const std::string& name);

struct ScoredKeypoint
{
    double x = 0;
    double y = 0;
    double score = 0;
    std::string detector_id;

    Point2 pos() const { return {x, y}; }
};

struct KeypointSet
{
    int frame_index = 0;
    int width = 0;
    int height = 0;
    std::vector<ScoredKeypoint> points;

    std::size_t size() const { return points.size(); }
};

/// Per-pixel displacement on the frame grid (rows = height, cols = width).
/// Convention: the content at pixel x of frame t came from x - f(x) in frame t-1.
using FlowField = Field2f;

struct GuidanceMask
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    bool at(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
    std::size_t count() const;
};

/// The per-frame observation: keypoint positions in frame t, their displacements
/// (same convention as FlowField) and confidences in [0, 1].
struct MotionSample
{
    int frame_index = 0;
    int width = 0;
    int height = 0;
    Pairsd keypoints;
    Pairsd displacements;
    Eigen::VectorXd confidences;

    Eigen::Index size() const { return keypoints.rows(); }
    bool empty() const { return keypoints.rows() == 0; }
    void resize(Eigen::Index n);
};

enum class FlowMode
{
    Dense,
    Sparse,
};

struct ObserverConfig
{
    std::vector<std::string> detectors = {"shitomasi"};
    /// Fusion weights keyed by detector id; missing ids weigh 1.
    std::map<std::string, double> detector_weights;
    double nms_radius = 4.0;
    int grid_gx = 16;
    int grid_gy = 16;
    int per_cell_k = 2;
    double min_separation = 8.0;
    double mask_radius = 16.0;
    int pyramid_levels = 3;
    int lk_window = 21;
    int lk_iterations = 20;
    int dense_stride = 8;
    int max_candidates = 2000;
    /// Shi-Tomasi: keep responses above quality_level * max response.
    double quality_level = 0.01;
    double min_response = 1e-4;
    /// FAST: intensity threshold in gray levels.
    int fast_threshold = 20;
    FlowMode flow_mode = FlowMode::Dense;

    double weight(const std::string& detector_id) const;
    int keypoint_cap() const { return grid_gx * grid_gy * per_cell_k; }
    void validate() const;
};

KeypointSet detect_keypoints(const Frame& frame, Detector detector, const ObserverConfig& cfg = {});

/// Weighted joint NMS across detector sets; proposals from different detectors that
/// fall within nms_radius of the leader merge at their score-weighted mean position.
KeypointSet fuse_detections(const std::vector<KeypointSet>& sets, const ObserverConfig& cfg);

/// Per grid cell top-k by score subject to a minimum separation.
KeypointSet homogenize(const KeypointSet& set, const ObserverConfig& cfg);

MotionSample estimate_sparse_flow(const Frame& prev, const Frame& cur, const KeypointSet& pts,
                                  const ObserverConfig& cfg);

FlowField estimate_dense_flow(const Frame& prev, const Frame& cur, const ObserverConfig& cfg);

GuidanceMask build_guidance_mask(const KeypointSet& candidates, double radius, int width, int height);

/// Dense flow inside the mask, inverse-distance interpolation (power 2, 16 nearest
/// candidates) of the dense flow at the candidates outside it.
FlowField fuse_flow(const FlowField& dense, const KeypointSet& candidates, const GuidanceMask& mask);

/// Displacements bilinearly sampled at the keypoints; confidences start at the keypoint scores.
MotionSample sample_motion(const FlowField& fused, const KeypointSet& kp);

/// Pyramid + gradients for Lucas-Kanade tracking.
struct LkPyramid
{
    std::vector<Planef> levels;
    std::vector<Planef> gx;
    std::vector<Planef> gy;

    LkPyramid(const Planef& base, int levels);
};

struct LkParams
{
    int window = 21;
    int iterations = 20;
    double min_eigen = 1e-5;
};

/// Tracks p from `from` into `to`. Returns the matched position, or nullopt on failure.
std::optional<Point2> lk_track(const LkPyramid& from, const LkPyramid& to, const Point2& p, const Vec2& guess,
                               const LkParams& params);

}  // namespace causalstab
