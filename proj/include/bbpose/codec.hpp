// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file codec.hpp
/// \brief Ground-truth confidence maps and direction fields, and the
/// per-stage supervision loss over them.

#include "bbpose/core.hpp"

namespace bbpose {

struct EncoderConfig {
    double sigma = 7.0;  ///< Gaussian spread, pixels.
    double delta = 8.0;  ///< Limb rectangle half-width, pixels.
    int stride = 1;      ///< Pixels per grid cell.

    void validate() const;
};

/// Gaussian values below this are stored as exact zero.
constexpr double kGaussianFloor = 1e-4;

struct EncodeDiagnostics {
    int skipped_degenerate_limbs = 0;
};

/// One scalar map per joint: the max over persons of
/// exp(-|p - x_jk|^2 / sigma^2), evaluated at cell centers.
std::vector<FieldGrid> encode_confidence_maps(const SceneAnnotation& scene, const EncoderConfig& cfg);

/// One 2-channel field per limb: the unit limb direction inside each
/// person's 2*delta-wide limb rectangle, averaged over the persons whose
/// rectangles overlap a cell. Limbs need both endpoints present; zero-length
/// limbs are skipped and counted in `diagnostics`.
std::vector<FieldGrid> encode_direction_fields(const SceneAnnotation& scene, const EncoderConfig& cfg,
                                               const Skeleton& skeleton,
                                               EncodeDiagnostics* diagnostics = nullptr);

/// Both of the above.
FieldMaps encode_scene(const SceneAnnotation& scene, const EncoderConfig& cfg, const Skeleton& skeleton,
                       EncodeDiagnostics* diagnostics = nullptr);

/// Membership test for the limb rectangle from `from` to `to`:
/// 0 <= (p - from).v <= |to - from| and |(p - from).v_perp| <= delta.
bool in_limb_rectangle(Point2 p, Point2 from, Point2 to, double delta);

/// Background map 1 - max_j S_j(p). Throws on shape mismatch.
FieldGrid background_map(std::span<const FieldGrid> confidence_maps);

struct LossWeights {
    double lambda = 0.05;  ///< Background term weight.
    FieldGrid mask;        ///< 1 where annotated, 0 where the annotation is missing.
};

struct StageLoss {
    double confidence = 0.0;
    double direction = 0.0;
};

/// Loss of one stage: masked squared error over confidence maps plus the
/// lambda-weighted (unmasked) background error, and masked squared error
/// over direction fields. Throws std::invalid_argument on shape mismatch.
StageLoss supervision_loss(const FieldMaps& predicted, const FieldGrid& predicted_background,
                           const FieldMaps& target, const FieldGrid& target_background,
                           const LossWeights& weights);

}  // namespace bbpose
