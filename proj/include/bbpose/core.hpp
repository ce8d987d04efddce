// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file core.hpp
/// \brief Skeleton topology, geometric primitives and the dense field grid.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bbpose {

constexpr int kNumJoints = 14;
constexpr int kNumLimbs = 13;

/// Joint indices in the 14-keypoint AI Challenger order.
enum Joint : int {
    kRightShoulder = 0,
    kRightElbow = 1,
    kRightWrist = 2,
    kLeftShoulder = 3,
    kLeftElbow = 4,
    kLeftWrist = 5,
    kRightHip = 6,
    kRightKnee = 7,
    kRightAnkle = 8,
    kLeftHip = 9,
    kLeftKnee = 10,
    kLeftAnkle = 11,
    kHeadTop = 12,
    kNeck = 13,
};

struct Limb {
    int parent = 0;
    int child = 0;
};

/// The fixed 14-joint / 13-limb body tree. Limbs are listed in depth-first
/// order from the root, so walking them in order always reaches a limb's
/// parent joint before the limb itself.
struct Skeleton {
    std::array<std::string_view, kNumJoints> joint_names;
    std::array<Limb, kNumLimbs> limbs;
    int root = kNeck;

    /// Index of the limb whose child is `joint`, or -1 for the root.
    int incoming_limb(int joint) const;
};

Skeleton canonical_skeleton();

/// True when every non-root joint is the child of exactly one limb and each
/// limb's parent was reached by an earlier limb (or is the root).
bool is_depth_first_tree(const Skeleton& skeleton);

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
double norm(Point2 p);
double distance(Point2 a, Point2 b);

struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    /// Closed-interval containment.
    bool contains(Point2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
    /// x_min < x_max, y_min < y_max and all coordinates finite.
    bool valid() const;

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Dense row-major grid of 1 (scalar map) or 2 (vector field) channels.
/// Cell (x, y) covers image pixels [stride*x, stride*(x+1)) and its value
/// belongs to the cell center stride*(x+0.5).
class FieldGrid {
public:
    FieldGrid() = default;
    FieldGrid(int width, int height, int channels, int stride);
    FieldGrid(int width, int height, int channels, int stride, std::vector<float> data);

    /// Grid that covers an image of the given pixel size at `stride`.
    static FieldGrid for_image(int image_width, int image_height, int channels, int stride);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    int stride() const { return stride_; }
    bool empty() const { return data_.empty(); }
    std::size_t cell_count() const { return static_cast<std::size_t>(width_) * height_; }

    float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    Point2 cell_center(int x, int y) const { return {stride_ * (x + 0.5), stride_ * (y + 0.5)}; }
    bool same_shape(const FieldGrid& other) const;

    friend bool operator==(const FieldGrid&, const FieldGrid&) = default;

private:
    std::size_t index(int x, int y, int c) const
    {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    int stride_ = 1;
    std::vector<float> data_;
};

/// Bilinear interpolation at pixel position `p`. Points outside the grid
/// extent take the nearest border value. The second entry is 0 for
/// single-channel grids.
std::array<double, 2> sample_bilinear(const FieldGrid& grid, Point2 p);

/// Predicted (or synthesized) network output: 14 confidence maps and 13
/// two-channel direction fields, all of the same spatial shape.
struct FieldMaps {
    std::vector<FieldGrid> confidence;
    std::vector<FieldGrid> direction;
};

/// Throws std::invalid_argument unless `maps` holds 14 scalar maps and 13
/// vector fields of one shape.
void check_field_maps(const FieldMaps& maps);

struct PoseJoint {
    Point2 location;
    double score = 1.0;
    std::optional<int> candidate_id;

    friend bool operator==(const PoseJoint&, const PoseJoint&) = default;
};

struct Pose {
    std::array<std::optional<PoseJoint>, kNumJoints> joints;
    std::optional<BoundingBox> source_box;

    int joint_count() const;
    /// Minimal box around the present joints; nullopt when there are none.
    /// May be degenerate (zero width or height).
    std::optional<BoundingBox> joint_bounds() const;

    friend bool operator==(const Pose&, const Pose&) = default;
};

struct SceneAnnotation {
    std::string image_id;
    int image_width = 0;
    int image_height = 0;
    std::vector<Pose> persons;
    std::vector<BoundingBox> boxes;
    /// Optional per-box detector confidence.
    std::vector<double> box_scores;
    /// Optional per-person confidence (prediction files).
    std::vector<double> scores;

    friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

}  // namespace bbpose
