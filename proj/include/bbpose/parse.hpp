// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file parse.hpp
/// \brief Box-constrained greedy pose assembly, pose NMS and pose completion.

#include <set>

#include "bbpose/detect.hpp"

namespace bbpose {

struct ParseConfig {
    double alpha = 0.2;  ///< Weight of the mean joint score.
    double beta = 0.2;   ///< Weight of the mean connection score.
    double gamma = 0.6;  ///< Weight of the pose-area / box-area ratio.
    double eta = 0.5;    ///< Poses within this distance of a reference pose are eliminated.
    double completion_min_score = 0.1;
    double min_connection_score = 0.05;
    /// Candidates up to this many pixels outside a box still count as inside
    /// it. Peaks are quantized to cell centers, so half a cell recovers
    /// joints lying on a tight box edge. parse_scene uses at least half the
    /// map stride.
    double box_margin = 0.5;
    /// Average connection scores over all 13 limb slots (absent = 0) instead
    /// of over the accepted connections only.
    bool connection_mean_over_all_limbs = false;

    void validate() const;
};

/// A pose as assembled inside one box, with the scores of the connections
/// that built it.
struct AssembledPose {
    Pose pose;
    std::vector<double> connection_scores;
};

struct ParsedPose {
    Pose pose;
    double confidence = 0.0;
    int box_index = 0;
};

/// Greedy assembly restricted to candidates inside `box` (grown by
/// box_margin). Limbs are visited
/// in skeleton order; within a limb, connections are accepted by decreasing
/// score unless they share a joint with an already accepted one or score
/// below min_connection_score. An accepted connection whose parent is not
/// yet owned starts a new person.
std::vector<AssembledPose> parse_box(const BoundingBox& box, std::span<const CandidateJoint> candidates,
                                     std::span<const CandidateConnection> connections, const Skeleton& skeleton,
                                     const ParseConfig& cfg);

/// alpha * mean joint score + beta * mean connection score
/// + gamma * area(joint bounds) / area(box).
double pose_confidence(const Pose& pose, std::span<const double> connection_scores, const BoundingBox& box,
                       const ParseConfig& cfg);

/// Number of differing joint slots over max(n_a, n_b). Slots match when both
/// are absent, or both present with the same candidate id (within 1 px when
/// either lacks an id). Throws std::invalid_argument if both poses are empty.
double pose_distance(const Pose& a, const Pose& b);

/// Confidence-ordered elimination of poses within eta of a kept reference,
/// then at most one pose per box_index. Result is sorted by confidence
/// descending, ties by box_index then input order.
std::vector<ParsedPose> pose_nms(std::vector<ParsedPose> poses, const ParseConfig& cfg);

/// Fills absent joints with the best unassigned candidate of that class
/// inside the pose's source box (grown by box_margin), scoring at least completion_min_score.
/// Adopted ids are inserted into `assigned`. Poses without a source box are
/// returned unchanged.
Pose complete_pose(const Pose& pose, std::span<const CandidateJoint> candidates, std::set<int>& assigned,
                   const ParseConfig& cfg);

struct PipelineConfig {
    DetectConfig detect;
    ParseConfig parse;
    bool pose_nms = true;
    bool pose_completion = true;
};

/// Peaks -> connection scores -> per-box parse -> confidence -> pose NMS ->
/// completion. `boxes` are used as given (extend them beforehand).
std::vector<ParsedPose> parse_scene(std::span<const BoundingBox> boxes, const FieldMaps& maps,
                                    const Skeleton& skeleton, const PipelineConfig& cfg);

}  // namespace bbpose
