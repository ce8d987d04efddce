// SPDX-License-Identifier: Apache-2.0
#include "bbpose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bbpose {

void OksConfig::validate() const
{
    for (double v : k) {
        if (!(v > 0.0)) throw std::invalid_argument("OKS constants must be > 0");
    }
}

std::array<double, 10> oks_thresholds()
{
    std::array<double, 10> t{};
    for (int i = 0; i < 10; ++i) t[i] = 0.5 + 0.05 * i;
    return t;
}

double oks(const Pose& pred, const Pose& gt, const BoundingBox& gt_box, const OksConfig& cfg)
{
    const double area = std::max(gt_box.area(), std::numeric_limits<double>::epsilon());
    double sum = 0.0;
    int visible = 0;
    for (int j = 0; j < kNumJoints; ++j) {
        if (!gt.joints[j]) continue;
        ++visible;
        if (!pred.joints[j]) continue;
        const Point2 d = pred.joints[j]->location - gt.joints[j]->location;
        sum += std::exp(-dot(d, d) / (2.0 * area * cfg.k[j] * cfg.k[j]));
    }
    if (visible == 0) throw std::invalid_argument("oks: ground truth has no visible joints");
    return sum / visible;
}

BoundingBox gt_scale_box(const SceneAnnotation& gt, std::size_t index)
{
    if (gt.boxes.size() == gt.persons.size()) return gt.boxes[index];
    return gt.persons[index].joint_bounds().value_or(BoundingBox{});
}

std::vector<int> greedy_match(std::span<const double> confidences, const std::vector<std::vector<double>>& oks_table,
                              double threshold)
{
    std::vector<std::size_t> order(confidences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return confidences[l] > confidences[r]; });

    std::vector<int> match(confidences.size(), -1);
    const std::size_t gt_count = oks_table.empty() ? 0 : oks_table.front().size();
    std::vector<bool> taken(gt_count, false);
    for (std::size_t p : order) {
        int best = -1;
        double best_oks = threshold;
        for (std::size_t g = 0; g < gt_count; ++g) {
            if (taken[g] || oks_table[p][g] < best_oks) continue;
            if (best >= 0 && oks_table[p][g] == best_oks) continue;
            best = static_cast<int>(g);
            best_oks = oks_table[p][g];
        }
        if (best >= 0) {
            taken[best] = true;
            match[p] = best;
        }
    }
    return match;
}

double average_precision_from_matches(std::span<const double> confidences, const std::vector<bool>& is_tp,
                                      int gt_count)
{
    if (gt_count <= 0) throw std::invalid_argument("average_precision: no ground truth");
    std::vector<std::size_t> order(confidences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return confidences[l] > confidences[r]; });

    // One (recall, precision) point per distinct confidence level.
    std::vector<double> recall;
    std::vector<double> precision;
    int tp = 0;
    int seen = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        tp += is_tp[order[i]] ? 1 : 0;
        ++seen;
        const bool group_end = i + 1 == order.size() || confidences[order[i + 1]] != confidences[order[i]];
        if (!group_end) continue;
        recall.push_back(static_cast<double>(tp) / gt_count);
        precision.push_back(static_cast<double>(tp) / seen);
    }
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double ap = 0.0;
    double previous_recall = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
        ap += (recall[i] - previous_recall) * precision[i];
        previous_recall = recall[i];
    }
    return ap;
}

namespace {

struct ScenePair {
    const SceneAnnotation* pred;
    const SceneAnnotation* gt;
};

std::vector<ScenePair> pair_scenes(std::span<const SceneAnnotation> predictions,
                                   std::span<const SceneAnnotation> ground_truth)
{
    std::map<std::string, const SceneAnnotation*> preds;
    for (const SceneAnnotation& p : predictions) {
        if (!preds.emplace(p.image_id, &p).second) {
            throw std::invalid_argument("duplicate prediction image id '" + p.image_id + "'");
        }
    }
    std::vector<ScenePair> pairs;
    std::map<std::string, bool> gt_ids;
    for (const SceneAnnotation& g : ground_truth) {
        if (!gt_ids.emplace(g.image_id, true).second) {
            throw std::invalid_argument("duplicate ground-truth image id '" + g.image_id + "'");
        }
        const auto it = preds.find(g.image_id);
        pairs.push_back({it == preds.end() ? nullptr : it->second, &g});
    }
    std::string orphans;
    for (const auto& [id, scene] : preds) {
        if (!gt_ids.contains(id)) orphans += (orphans.empty() ? "" : ", ") + ("'" + id + "'");
    }
    if (!orphans.empty()) throw std::invalid_argument("predictions without ground truth: " + orphans);
    // Canonical order keeps results independent of input scene order.
    std::sort(pairs.begin(), pairs.end(),
              [](const ScenePair& l, const ScenePair& r) { return l.gt->image_id < r.gt->image_id; });
    return pairs;
}

double prediction_confidence(const SceneAnnotation& scene, std::size_t i)
{
    return i < scene.scores.size() ? scene.scores[i] : 1.0;
}

}  // namespace

EvalReport average_precision(std::span<const SceneAnnotation> predictions, std::span<const SceneAnnotation> ground_truth,
                             const OksConfig& cfg)
{
    cfg.validate();
    const auto pairs = pair_scenes(predictions, ground_truth);

    int gt_total = 0;
    for (const ScenePair& p : pairs) gt_total += static_cast<int>(p.gt->persons.size());
    if (gt_total == 0) throw std::invalid_argument("average_precision: no ground-truth persons");

    // OKS tables per scene: [prediction][gt].
    std::vector<std::vector<std::vector<double>>> tables;
    for (const ScenePair& p : pairs) {
        std::vector<std::vector<double>> table;
        if (p.pred) {
            for (const Pose& pred : p.pred->persons) {
                std::vector<double> row;
                for (std::size_t g = 0; g < p.gt->persons.size(); ++g) {
                    row.push_back(oks(pred, p.gt->persons[g], gt_scale_box(*p.gt, g), cfg));
                }
                table.push_back(std::move(row));
            }
        }
        tables.push_back(std::move(table));
    }

    EvalReport report;
    const auto thresholds = oks_thresholds();
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        std::vector<double> confidences;
        std::vector<bool> is_tp;
        int matched = 0;
        double oks_sum = 0.0;
        for (std::size_t s = 0; s < pairs.size(); ++s) {
            if (!pairs[s].pred) continue;
            const SceneAnnotation& pred = *pairs[s].pred;
            std::vector<double> conf;
            for (std::size_t i = 0; i < pred.persons.size(); ++i) conf.push_back(prediction_confidence(pred, i));
            const auto match = greedy_match(conf, tables[s], thresholds[t]);
            for (std::size_t i = 0; i < match.size(); ++i) {
                confidences.push_back(conf[i]);
                is_tp.push_back(match[i] >= 0);
                if (match[i] >= 0) {
                    ++matched;
                    oks_sum += tables[s][i][match[i]];
                }
            }
        }
        report.ap_per_threshold[t] = average_precision_from_matches(confidences, is_tp, gt_total);
        if (t == 0) {
            report.matched = matched;
            report.missed = gt_total - matched;
            report.spurious = static_cast<int>(confidences.size()) - matched;
            report.mean_oks = matched > 0 ? oks_sum / matched : 0.0;
        }
    }
    report.ap = std::accumulate(report.ap_per_threshold.begin(), report.ap_per_threshold.end(), 0.0) /
                static_cast<double>(report.ap_per_threshold.size());
    return report;
}

PipelineDiagnostics pipeline_diagnostics(std::span<const ParsedPose> result, const SceneAnnotation& gt,
                                         const OksConfig& cfg)
{
    PipelineDiagnostics diag;
    if (!result.empty()) {
        double joints = 0.0;
        for (const ParsedPose& p : result) joints += p.pose.joint_count();
        diag.mean_joints_per_pose = joints / static_cast<double>(result.size());
    }

    std::vector<double> conf;
    std::vector<std::vector<double>> table;
    for (const ParsedPose& p : result) {
        conf.push_back(p.confidence);
        std::vector<double> row;
        for (std::size_t g = 0; g < gt.persons.size(); ++g) {
            row.push_back(gt.persons[g].joint_count() > 0 ? oks(p.pose, gt.persons[g], gt_scale_box(gt, g), cfg) : 0.0);
        }
        table.push_back(std::move(row));
    }
    const auto match = greedy_match(conf, table, 0.5);

    std::vector<int> owner(gt.persons.size(), -1);
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (match[i] >= 0) {
            owner[match[i]] = static_cast<int>(i);
            continue;
        }
        const bool overlaps_claimed = std::any_of(table[i].begin(), table[i].end(), [](double v) { return v >= 0.5; });
        if (overlaps_claimed) ++diag.duplicate_poses;
    }

    for (std::size_t g = 0; g < gt.persons.size(); ++g) {
        for (int j = 0; j < kNumJoints; ++j) {
            if (!gt.persons[g].joints[j]) continue;
            if (owner[g] < 0 || !result[owner[g]].pose.joints[j]) ++diag.disconnected_joints;
        }
    }
    return diag;
}

SceneAnnotation to_prediction_scene(std::span<const ParsedPose> result, const SceneAnnotation& like)
{
    SceneAnnotation scene;
    scene.image_id = like.image_id;
    scene.image_width = like.image_width;
    scene.image_height = like.image_height;
    for (const ParsedPose& p : result) {
        scene.persons.push_back(p.pose);
        scene.scores.push_back(p.confidence);
        scene.boxes.push_back(p.pose.source_box.value_or(p.pose.joint_bounds().value_or(BoundingBox{})));
    }
    return scene;
}

}  // namespace bbpose
