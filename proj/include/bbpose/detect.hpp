// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file detect.hpp
/// \brief Candidate joints from confidence maps, limb connection scoring
/// against direction fields, and test-time helpers (scale fusion, box
/// extension).

#include <functional>

#include "bbpose/core.hpp"

namespace bbpose {

struct DetectConfig {
    double peak_threshold = 0.1;
    int nms_window = 5;        ///< Odd neighborhood size in cells.
    double sample_step = 1.0;  ///< Pixels between line-integral samples.
    double box_extension = 0.10;
    bool subpixel_refine = false;

    void validate() const;
};

struct CandidateJoint {
    int id = 0;
    int joint_class = 0;
    Point2 location;
    double score = 0.0;

    friend bool operator==(const CandidateJoint&, const CandidateJoint&) = default;
};

struct CandidateConnection {
    int limb_class = 0;
    int start = 0;  ///< Candidate id of the limb's parent joint.
    int end = 0;    ///< Candidate id of the limb's child joint.
    double score = 0.0;

    friend bool operator==(const CandidateConnection&, const CandidateConnection&) = default;
};

/// Local maxima of `map` over an nms_window neighborhood with value at or
/// above the threshold. Plateaus resolve to the lowest row-major index.
/// Locations are cell centers in pixels; ids count up from `first_id`.
std::vector<CandidateJoint> detect_peaks(const FieldGrid& map, int joint_class, const DetectConfig& cfg,
                                         int first_id = 0);

/// Peaks of all 14 maps with ids unique across the whole pass.
std::vector<CandidateJoint> detect_all_peaks(std::span<const FieldGrid> maps, const DetectConfig& cfg);

/// Mean over |Q| = max(2, ceil(|d| / sample_step)) evenly spaced samples on
/// the segment a->b (endpoints included) of field(q) . d/|d|.
/// Throws std::invalid_argument when a == b.
double connection_score(const FieldGrid& field, Point2 a, Point2 b, const DetectConfig& cfg);

/// Optional filter deciding whether a (parent, child) pair is worth scoring.
using PairFilter = std::function<bool(const CandidateJoint&, const CandidateJoint&)>;

/// Scores every (parent-class, child-class) candidate pair of every limb.
/// Ordered by limb class, score descending, then (start, end) ascending.
std::vector<CandidateConnection> score_all_connections(std::span<const CandidateJoint> candidates,
                                                       std::span<const FieldGrid> fields,
                                                       const Skeleton& skeleton, const DetectConfig& cfg,
                                                       const PairFilter& filter = {});

struct ScaleOutput {
    double scale = 1.0;
    FieldMaps maps;
};

struct GridShape {
    int width = 0;
    int height = 0;
    int stride = 1;
};

/// Resamples `grid` onto `shape`, matching the two grids by their extents.
FieldGrid resample(const FieldGrid& grid, const GridShape& shape);

/// Per-cell mean of all scales after resampling each to `base`.
/// Throws std::invalid_argument on empty input.
FieldMaps fuse_scales(std::span<const ScaleOutput> outputs, const GridShape& base);

/// Grows width and height by `fraction` in total (half per side), then clips
/// to the image.
BoundingBox extend_box(const BoundingBox& box, double image_width, double image_height, double fraction);

}  // namespace bbpose
