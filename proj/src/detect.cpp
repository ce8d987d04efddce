// SPDX-License-Identifier: Apache-2.0
#include "bbpose/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bbpose {

void DetectConfig::validate() const
{
    if (!(peak_threshold > 0.0 && peak_threshold < 1.0)) throw std::invalid_argument("peak_threshold must be in (0,1)");
    if (nms_window < 3 || nms_window % 2 == 0) throw std::invalid_argument("nms_window must be odd and >= 3");
    if (!(sample_step > 0.0)) throw std::invalid_argument("sample_step must be > 0");
    if (!(box_extension >= 0.0)) throw std::invalid_argument("box_extension must be >= 0");
}

namespace {

// Vertex offset of the parabola through (-1, l), (0, c), (1, r).
double parabola_offset(double l, double c, double r)
{
    const double denom = l - 2.0 * c + r;
    if (denom >= 0.0) return 0.0;
    return std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<CandidateJoint> detect_peaks(const FieldGrid& map, int joint_class, const DetectConfig& cfg, int first_id)
{
    cfg.validate();
    if (map.channels() != 1) throw std::invalid_argument("detect_peaks: map must be single-channel");
    const int half = cfg.nms_window / 2;
    const int w = map.width();
    const int h = map.height();
    const auto values = map.values();
    const float threshold = static_cast<float>(cfg.peak_threshold);

    std::vector<CandidateJoint> peaks;
    int next_id = first_id;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float v = values[static_cast<std::size_t>(y) * w + x];
            if (v < threshold) continue;
            bool is_peak = true;
            for (int ny = std::max(0, y - half); is_peak && ny <= std::min(h - 1, y + half); ++ny) {
                for (int nx = std::max(0, x - half); nx <= std::min(w - 1, x + half); ++nx) {
                    if (nx == x && ny == y) continue;
                    const float n = values[static_cast<std::size_t>(ny) * w + nx];
                    // Earlier row-major neighbors win ties.
                    const bool earlier = ny < y || (ny == y && nx < x);
                    if (n > v || (n == v && earlier)) {
                        is_peak = false;
                        break;
                    }
                }
            }
            if (!is_peak) continue;

            Point2 location = map.cell_center(x, y);
            if (cfg.subpixel_refine) {
                if (x > 0 && x < w - 1) location.x += map.stride() * parabola_offset(map.at(x - 1, y), v, map.at(x + 1, y));
                if (y > 0 && y < h - 1) location.y += map.stride() * parabola_offset(map.at(x, y - 1), v, map.at(x, y + 1));
            }
            peaks.push_back({next_id++, joint_class, location, std::min(1.0, static_cast<double>(v))});
        }
    }
    return peaks;
}

std::vector<CandidateJoint> detect_all_peaks(std::span<const FieldGrid> maps, const DetectConfig& cfg)
{
    std::vector<CandidateJoint> all;
    for (std::size_t j = 0; j < maps.size(); ++j) {
        auto peaks = detect_peaks(maps[j], static_cast<int>(j), cfg, static_cast<int>(all.size()));
        all.insert(all.end(), peaks.begin(), peaks.end());
    }
    return all;
}

double connection_score(const FieldGrid& field, Point2 a, Point2 b, const DetectConfig& cfg)
{
    if (field.channels() != 2) throw std::invalid_argument("connection_score: field must have 2 channels");
    if (!(cfg.sample_step > 0.0)) throw std::invalid_argument("connection_score: sample_step must be > 0");
    const Point2 d = b - a;
    const double length = norm(d);
    if (length == 0.0) throw std::invalid_argument("connection_score: coincident endpoints");
    const Point2 unit = (1.0 / length) * d;

    const int samples = std::max(2, static_cast<int>(std::ceil(length / cfg.sample_step)));
    double sum = 0.0;
    double max_magnitude = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / (samples - 1);
        const auto v = sample_bilinear(field, a + t * d);
        sum += v[0] * unit.x + v[1] * unit.y;
        max_magnitude = std::max(max_magnitude, std::hypot(v[0], v[1]));
    }
    return std::clamp(sum / samples, -max_magnitude, max_magnitude);
}

std::vector<CandidateConnection> score_all_connections(std::span<const CandidateJoint> candidates,
                                                       std::span<const FieldGrid> fields, const Skeleton& skeleton,
                                                       const DetectConfig& cfg, const PairFilter& filter)
{
    if (fields.size() != kNumLimbs) throw std::invalid_argument("score_all_connections: expected 13 fields");
    std::array<std::vector<const CandidateJoint*>, kNumJoints> by_class;
    for (const CandidateJoint& c : candidates) {
        if (c.joint_class < 0 || c.joint_class >= kNumJoints) {
            throw std::invalid_argument("score_all_connections: bad joint class");
        }
        by_class[c.joint_class].push_back(&c);
    }

    std::vector<CandidateConnection> out;
    for (int limb = 0; limb < kNumLimbs; ++limb) {
        const auto first = out.size();
        for (const CandidateJoint* parent : by_class[skeleton.limbs[limb].parent]) {
            for (const CandidateJoint* child : by_class[skeleton.limbs[limb].child]) {
                if (filter && !filter(*parent, *child)) continue;
                if (parent->location == child->location) continue;
                out.push_back({limb, parent->id, child->id,
                               connection_score(fields[limb], parent->location, child->location, cfg)});
            }
        }
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                  [](const CandidateConnection& l, const CandidateConnection& r) {
                      if (l.score != r.score) return l.score > r.score;
                      if (l.start != r.start) return l.start < r.start;
                      return l.end < r.end;
                  });
    }
    return out;
}

FieldGrid resample(const FieldGrid& grid, const GridShape& shape)
{
    if (grid.empty()) throw std::invalid_argument("resample: empty grid");
    if (grid.width() == shape.width && grid.height() == shape.height) {
        return FieldGrid(shape.width, shape.height, grid.channels(), shape.stride,
                         std::vector<float>(grid.values().begin(), grid.values().end()));
    }
    FieldGrid out(shape.width, shape.height, grid.channels(), shape.stride);
    const double sx = static_cast<double>(grid.width()) / shape.width;
    const double sy = static_cast<double>(grid.height()) / shape.height;
    for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
            // Target cell center expressed in the source grid's pixel frame.
            const Point2 p{(x + 0.5) * sx * grid.stride(), (y + 0.5) * sy * grid.stride()};
            const auto v = sample_bilinear(grid, p);
            for (int c = 0; c < grid.channels(); ++c) out.at(x, y, c) = static_cast<float>(v[c]);
        }
    }
    return out;
}

FieldMaps fuse_scales(std::span<const ScaleOutput> outputs, const GridShape& base)
{
    if (outputs.empty()) throw std::invalid_argument("fuse_scales: no scales given");
    for (const ScaleOutput& o : outputs) check_field_maps(o.maps);

    auto fuse = [&](auto member, std::size_t count) {
        std::vector<FieldGrid> fused;
        for (std::size_t i = 0; i < count; ++i) {
            const int channels = (outputs.front().maps.*member)[i].channels();
            std::vector<FieldGrid> resampled;
            resampled.reserve(outputs.size());
            for (const ScaleOutput& o : outputs) resampled.push_back(resample((o.maps.*member)[i], base));
            // Summing in sorted order keeps the mean independent of scale order.
            std::vector<float> mean(static_cast<std::size_t>(base.width) * base.height * channels);
            std::vector<float> terms(outputs.size());
            for (std::size_t k = 0; k < mean.size(); ++k) {
                for (std::size_t s = 0; s < resampled.size(); ++s) terms[s] = resampled[s].values()[k];
                std::sort(terms.begin(), terms.end());
                double sum = 0.0;
                for (float t : terms) sum += t;
                mean[k] = static_cast<float>(sum / static_cast<double>(terms.size()));
            }
            fused.emplace_back(base.width, base.height, channels, base.stride, std::move(mean));
        }
        return fused;
    };
    return {fuse(&FieldMaps::confidence, kNumJoints), fuse(&FieldMaps::direction, kNumLimbs)};
}

BoundingBox extend_box(const BoundingBox& box, double image_width, double image_height, double fraction)
{
    if (!(fraction >= 0.0)) throw std::invalid_argument("extend_box: fraction must be >= 0");
    const double dx = 0.5 * fraction * box.width();
    const double dy = 0.5 * fraction * box.height();
    return {std::max(0.0, box.x_min - dx), std::max(0.0, box.y_min - dy), std::min(image_width, box.x_max + dx),
            std::min(image_height, box.y_max + dy)};
}

}  // namespace bbpose
