// SPDX-License-Identifier: Apache-2.0
#include "bbpose/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbpose {

Skeleton canonical_skeleton()
{
    Skeleton s;
    s.joint_names = {"right_shoulder", "right_elbow", "right_wrist", "left_shoulder", "left_elbow",
                     "left_wrist",     "right_hip",   "right_knee",  "right_ankle",   "left_hip",
                     "left_knee",      "left_ankle",  "head_top",    "neck"};
    s.limbs = {{
        {kNeck, kHeadTop},
        {kNeck, kRightShoulder},
        {kRightShoulder, kRightElbow},
        {kRightElbow, kRightWrist},
        {kNeck, kLeftShoulder},
        {kLeftShoulder, kLeftElbow},
        {kLeftElbow, kLeftWrist},
        {kNeck, kRightHip},
        {kRightHip, kRightKnee},
        {kRightKnee, kRightAnkle},
        {kNeck, kLeftHip},
        {kLeftHip, kLeftKnee},
        {kLeftKnee, kLeftAnkle},
    }};
    s.root = kNeck;
    return s;
}

int Skeleton::incoming_limb(int joint) const
{
    for (int c = 0; c < kNumLimbs; ++c) {
        if (limbs[c].child == joint) return c;
    }
    return -1;
}

bool is_depth_first_tree(const Skeleton& skeleton)
{
    if (skeleton.root < 0 || skeleton.root >= kNumJoints) return false;
    std::array<bool, kNumJoints> reached{};
    reached[skeleton.root] = true;
    for (const Limb& limb : skeleton.limbs) {
        if (limb.parent < 0 || limb.parent >= kNumJoints || limb.child < 0 || limb.child >= kNumJoints) {
            return false;
        }
        if (!reached[limb.parent] || reached[limb.child]) return false;
        reached[limb.child] = true;
    }
    return std::all_of(reached.begin(), reached.end(), [](bool r) { return r; });
}

double norm(Point2 p) { return std::hypot(p.x, p.y); }
double distance(Point2 a, Point2 b) { return norm(a - b); }

bool BoundingBox::valid() const
{
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max) &&
           x_min < x_max && y_min < y_max;
}

FieldGrid::FieldGrid(int width, int height, int channels, int stride)
    : FieldGrid(width, height, channels, stride,
                std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                   std::max(channels, 0)))
{
}

FieldGrid::FieldGrid(int width, int height, int channels, int stride, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), stride_(stride), data_(std::move(data))
{
    if (width < 0 || height < 0) throw std::invalid_argument("FieldGrid: negative dimensions");
    if (channels != 1 && channels != 2) throw std::invalid_argument("FieldGrid: channels must be 1 or 2");
    if (stride < 1) throw std::invalid_argument("FieldGrid: stride must be >= 1");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw std::invalid_argument("FieldGrid: data length " + std::to_string(data_.size()) +
                                    " does not match shape");
    }
    for (float v : data_) {
        if (!std::isfinite(v)) throw std::invalid_argument("FieldGrid: non-finite value");
    }
}

FieldGrid FieldGrid::for_image(int image_width, int image_height, int channels, int stride)
{
    if (stride < 1) throw std::invalid_argument("FieldGrid: stride must be >= 1");
    return FieldGrid((image_width + stride - 1) / stride, (image_height + stride - 1) / stride, channels, stride);
}

bool FieldGrid::same_shape(const FieldGrid& other) const
{
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_ &&
           stride_ == other.stride_;
}

std::array<double, 2> sample_bilinear(const FieldGrid& grid, Point2 p)
{
    if (grid.empty()) throw std::invalid_argument("sample_bilinear: empty grid");
    // Continuous cell coordinates; cell centers sit on integers.
    const double u = std::clamp(p.x / grid.stride() - 0.5, 0.0, static_cast<double>(grid.width() - 1));
    const double v = std::clamp(p.y / grid.stride() - 0.5, 0.0, static_cast<double>(grid.height() - 1));
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const int x1 = std::min(x0 + 1, grid.width() - 1);
    const int y1 = std::min(y0 + 1, grid.height() - 1);
    const double fx = u - x0;
    const double fy = v - y0;

    std::array<double, 2> out{0.0, 0.0};
    for (int c = 0; c < grid.channels(); ++c) {
        const double top = (1.0 - fx) * grid.at(x0, y0, c) + fx * grid.at(x1, y0, c);
        const double bottom = (1.0 - fx) * grid.at(x0, y1, c) + fx * grid.at(x1, y1, c);
        out[c] = (1.0 - fy) * top + fy * bottom;
    }
    return out;
}

void check_field_maps(const FieldMaps& maps)
{
    if (maps.confidence.size() != kNumJoints) {
        throw std::invalid_argument("expected 14 confidence maps, got " + std::to_string(maps.confidence.size()));
    }
    if (maps.direction.size() != kNumLimbs) {
        throw std::invalid_argument("expected 13 direction fields, got " + std::to_string(maps.direction.size()));
    }
    const FieldGrid& ref = maps.confidence.front();
    for (const FieldGrid& g : maps.confidence) {
        if (g.channels() != 1 || !g.same_shape(ref)) throw std::invalid_argument("confidence map shape mismatch");
    }
    for (const FieldGrid& g : maps.direction) {
        if (g.channels() != 2 || g.width() != ref.width() || g.height() != ref.height() ||
            g.stride() != ref.stride()) {
            throw std::invalid_argument("direction field shape mismatch");
        }
    }
}

int Pose::joint_count() const
{
    return static_cast<int>(std::count_if(joints.begin(), joints.end(), [](const auto& j) { return j.has_value(); }));
}

std::optional<BoundingBox> Pose::joint_bounds() const
{
    std::optional<BoundingBox> box;
    for (const auto& j : joints) {
        if (!j) continue;
        const Point2 p = j->location;
        if (!box) {
            box = BoundingBox{p.x, p.y, p.x, p.y};
        } else {
            box->x_min = std::min(box->x_min, p.x);
            box->y_min = std::min(box->y_min, p.y);
            box->x_max = std::max(box->x_max, p.x);
            box->y_max = std::max(box->y_max, p.y);
        }
    }
    return box;
}

}  // namespace bbpose
