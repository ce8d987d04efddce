// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file synth.hpp
/// \brief Deterministic synthetic scenes and simulated prediction error.

#include <cstdint>

#include "bbpose/codec.hpp"

namespace bbpose {

/// Counter-based pseudo-random generator. Draw i (0-based) of stream s under
/// seed k is
///
///     key   = mix(k ^ mix(s + 0x632BE59BD9B4E019))
///     value = mix(key + (i + 1) * 0x9E3779B97F4A7C15)
///
/// where mix is the SplitMix64 finalizer. Uniform doubles take the top 53
/// bits. The sequence is identical on every platform.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next();
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);

    static std::uint64_t mix(std::uint64_t z);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

struct OcclusionConfig {
    int limb_class = 3;
    double probability = 1.0;  ///< Per person.
};

struct SynthConfig {
    std::uint64_t seed = 0;
    int min_persons = 1;
    int max_persons = 5;
    double min_person_height = 100.0;  ///< Pixels, head top to ankles.
    double max_person_height = 180.0;
    double min_separation = 120.0;  ///< Between person box centers.
    int image_width = 848;
    int image_height = 480;
    double noise_amplitude = 0.0;
    std::optional<OcclusionConfig> occlusion;
    int placement_retries = 200;

    void validate() const;
};

struct GeneratedScene {
    SceneAnnotation scene;
    /// Persons asked for; the scene holds fewer when packing failed.
    int requested_persons = 0;
};

/// Articulated 14-joint figures placed inside the image with pairwise box
/// center distance >= min_separation. Ground-truth boxes are the joint
/// bounds. A pure function of `cfg`.
GeneratedScene generate_scene(const SynthConfig& cfg);

struct PerturbedMaps {
    FieldMaps maps;
    std::vector<int> occluded_persons;
};

/// Adds uniform noise in [-noise_amplitude, noise_amplitude] to every value
/// (confidence maps clamped to [0, 1]), then zeroes the configured limb's
/// direction field inside the limb rectangle of each occluded person.
/// `encoder` supplies the rectangle half-width.
PerturbedMaps perturb_fields(const FieldMaps& maps, const SceneAnnotation& scene, const SynthConfig& cfg,
                             const EncoderConfig& encoder, const Skeleton& skeleton);

}  // namespace bbpose
