// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file eval.hpp
/// \brief Object keypoint similarity, AP over OKS thresholds, and pipeline
/// diagnostics.

#include "bbpose/parse.hpp"

namespace bbpose {

struct OksConfig {
    /// Per-joint falloff constants k_i (twice the COCO per-keypoint sigmas;
    /// head top reuses the nose value, neck the shoulder value).
    std::array<double, kNumJoints> k = {0.158, 0.144, 0.124, 0.158, 0.144, 0.124, 0.214,
                                        0.174, 0.178, 0.214, 0.174, 0.178, 0.052, 0.158};

    void validate() const;
};

/// OKS thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> oks_thresholds();

/// Mean over visible ground-truth joints of exp(-d^2 / (2 s^2 k^2)) with
/// s^2 = area(gt_box); absent predicted joints contribute 0.
/// Throws std::invalid_argument if gt has no joints.
double oks(const Pose& pred, const Pose& gt, const BoundingBox& gt_box, const OksConfig& cfg);

/// Box used for the OKS scale of ground-truth person `index`: the scene box
/// of the same index when the scene has one box per person, else the
/// person's joint bounds.
BoundingBox gt_scale_box(const SceneAnnotation& gt, std::size_t index);

struct EvalReport {
    double ap = 0.0;
    std::array<double, 10> ap_per_threshold{};
    /// Mean OKS of the matches made at the 0.50 threshold.
    double mean_oks = 0.0;
    /// Counts at the 0.50 threshold.
    int matched = 0;
    int missed = 0;
    int spurious = 0;
};

/// Greedy matching of `pred` to `gt` within one scene at `threshold`:
/// predictions in decreasing confidence take the unmatched ground truth with
/// the highest OKS >= threshold. Returns, per prediction in input order, the
/// matched gt index or -1.
std::vector<int> greedy_match(std::span<const double> confidences, const std::vector<std::vector<double>>& oks_table,
                              double threshold);

/// Area under the all-point interpolated precision/recall curve. Equal
/// confidences are treated as one operating point. `is_tp` and
/// `confidences` run in parallel.
double average_precision_from_matches(std::span<const double> confidences, const std::vector<bool>& is_tp,
                                      int gt_count);

/// Scenes are paired by image_id. Prediction confidences come from
/// SceneAnnotation::scores (1.0 when absent). Throws std::invalid_argument
/// when there is no ground truth or ids do not pair up.
EvalReport average_precision(std::span<const SceneAnnotation> predictions, std::span<const SceneAnnotation> ground_truth,
                             const OksConfig& cfg);

struct PipelineDiagnostics {
    /// Predictions whose best ground truth (OKS >= 0.5) was already claimed.
    int duplicate_poses = 0;
    double mean_joints_per_pose = 0.0;
    /// Visible ground-truth joints with no predicted counterpart in their
    /// matched pose (all of them for unmatched persons).
    int disconnected_joints = 0;
};

PipelineDiagnostics pipeline_diagnostics(std::span<const ParsedPose> result, const SceneAnnotation& gt,
                                         const OksConfig& cfg = {});

/// Prediction scene built from parse output (poses, confidences, boxes).
SceneAnnotation to_prediction_scene(std::span<const ParsedPose> result, const SceneAnnotation& like);

}  // namespace bbpose
