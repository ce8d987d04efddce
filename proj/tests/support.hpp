// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared helpers for the unit and acceptance suites. Everything under
// `oracle` is written independently of the library code it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <numeric>
#include <vector>

#include "bbpose/codec.hpp"
#include "bbpose/eval.hpp"
#include "bbpose/parse.hpp"
#include "bbpose/synth.hpp"

namespace bbpose::testing {

inline Pose make_pose(std::initializer_list<std::pair<int, Point2>> joints)
{
    Pose p;
    for (const auto& [j, loc] : joints) p.joints[j] = PoseJoint{loc, 1.0, std::nullopt};
    return p;
}

inline SceneAnnotation make_scene(int w, int h, std::vector<Pose> persons)
{
    SceneAnnotation s;
    s.image_width = w;
    s.image_height = h;
    for (const Pose& p : persons) {
        if (auto b = p.joint_bounds()) s.boxes.push_back(*b);
    }
    s.persons = std::move(persons);
    return s;
}

/// Copy of `pose` moved by `offset`.
inline Pose translated(Pose pose, Point2 offset)
{
    for (auto& j : pose.joints) {
        if (j) j->location = j->location + offset;
    }
    if (pose.source_box) {
        auto& b = *pose.source_box;
        b = {b.x_min + offset.x, b.y_min + offset.y, b.x_max + offset.x, b.y_max + offset.y};
    }
    return pose;
}

inline std::vector<BoundingBox> extended_boxes(const SceneAnnotation& scene, double fraction)
{
    std::vector<BoundingBox> out;
    for (const BoundingBox& b : scene.boxes) {
        out.push_back(extend_box(b, scene.image_width, scene.image_height, fraction));
    }
    return out;
}

/// Per ground-truth person: OKS of its matched prediction (0 when
/// unmatched) and the mean per-joint pixel error of the match.
struct PersonOutcome {
    double oks = 0.0;
    double mean_joint_error = 0.0;
    int matched_prediction = -1;
};

inline std::vector<PersonOutcome> person_outcomes(std::span<const ParsedPose> result, const SceneAnnotation& gt,
                                                  double threshold, const OksConfig& cfg = {})
{
    std::vector<double> conf;
    std::vector<std::vector<double>> table;
    for (const ParsedPose& p : result) {
        conf.push_back(p.confidence);
        std::vector<double> row;
        for (std::size_t g = 0; g < gt.persons.size(); ++g) row.push_back(oks(p.pose, gt.persons[g], gt.boxes[g], cfg));
        table.push_back(std::move(row));
    }
    const auto match = greedy_match(conf, table, threshold);
    std::vector<PersonOutcome> out(gt.persons.size());
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (match[i] < 0) continue;
        PersonOutcome& o = out[match[i]];
        o.oks = table[i][match[i]];
        o.matched_prediction = static_cast<int>(i);
        double err = 0.0;
        int n = 0;
        for (int j = 0; j < kNumJoints; ++j) {
            const auto& a = result[i].pose.joints[j];
            const auto& b = gt.persons[match[i]].joints[j];
            if (!a || !b) continue;
            err += distance(a->location, b->location);
            ++n;
        }
        o.mean_joint_error = n ? err / n : 0.0;
    }
    return out;
}

namespace oracle {

/// exp(-r^2 / sigma^2) written out directly.
inline double gaussian(double dx, double dy, double sigma) { return std::exp(-(dx * dx + dy * dy) / (sigma * sigma)); }

/// All cells that are >= every 8-neighbor and above `threshold`, counting a
/// plateau once (its first cell in row-major order).
inline int count_local_maxima(const FieldGrid& map, double threshold)
{
    int count = 0;
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            const float v = map.at(x, y);
            if (v < threshold) continue;
            bool ok = true;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= map.width() || ny >= map.height()) continue;
                    const float n = map.at(nx, ny);
                    if (n > v) ok = false;
                    if (n == v && (dy < 0 || (dy == 0 && dx < 0))) ok = false;
                }
            }
            count += ok ? 1 : 0;
        }
    }
    return count;
}

/// Precision/recall area with the envelope taken over operating points at
/// each distinct confidence.
inline double ap_from_ranking(const std::vector<std::pair<double, bool>>& ranked_in, int gt_count)
{
    auto ranked = ranked_in;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::pair<double, double>> points;  // (recall, precision)
    int tp = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        tp += ranked[i].second;
        if (i + 1 < ranked.size() && ranked[i + 1].first == ranked[i].first) continue;
        points.push_back({double(tp) / gt_count, double(tp) / double(i + 1)});
    }
    double ap = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = 0.0;
        for (std::size_t k = i; k < points.size(); ++k) best = std::max(best, points[k].second);
        ap += (points[i].first - prev) * best;
        prev = points[i].first;
    }
    return ap;
}

/// Maximum AP over every one-to-one assignment of predictions to
/// ground-truth poses with OKS >= threshold (single scene).
inline double best_assignment_ap(const std::vector<double>& conf, const std::vector<std::vector<double>>& table,
                                 int gt_count, double threshold)
{
    const std::size_t n = conf.size();
    std::vector<int> assign(n, -1);
    std::vector<bool> used(static_cast<std::size_t>(gt_count), false);
    double best = 0.0;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == n) {
            std::vector<std::pair<double, bool>> ranked;
            for (std::size_t k = 0; k < n; ++k) ranked.push_back({conf[k], assign[k] >= 0});
            best = std::max(best, ap_from_ranking(ranked, gt_count));
            return;
        }
        assign[i] = -1;
        rec(i + 1);
        for (int g = 0; g < gt_count; ++g) {
            if (used[g] || table[i][g] < threshold) continue;
            used[g] = true;
            assign[i] = g;
            rec(i + 1);
            assign[i] = -1;
            used[g] = false;
        }
    };
    rec(0);
    return best;
}

}  // namespace oracle

}  // namespace bbpose::testing
