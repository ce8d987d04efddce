// SPDX-License-Identifier: Apache-2.0
#include "bbpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bbpose {

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL)))
{
}

std::uint64_t CounterRng::mix(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t CounterRng::next()
{
    ++counter_;
    return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

int CounterRng::uniform_int(int lo, int hi)
{
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next() % span);
}

void SynthConfig::validate() const
{
    if (min_persons < 0 || max_persons < min_persons) throw std::invalid_argument("person count range is empty");
    if (!(min_person_height > 0.0) || max_person_height < min_person_height) {
        throw std::invalid_argument("person height range is empty");
    }
    if (!(min_separation >= 0.0)) throw std::invalid_argument("min_separation must be >= 0");
    if (image_width < 1 || image_height < 1) throw std::invalid_argument("image size must be positive");
    if (!(noise_amplitude >= 0.0)) throw std::invalid_argument("noise_amplitude must be >= 0");
    if (occlusion && (occlusion->limb_class < 0 || occlusion->limb_class >= kNumLimbs)) {
        throw std::invalid_argument("occluded limb class out of range");
    }
}

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;
constexpr double kMargin = 2.0;

// Figure with the neck at the origin; image y grows downward.
Pose sample_figure(CounterRng& rng, double height)
{
    const double lean = rng.uniform(-10.0, 10.0) * kDegree;
    const Point2 down{-std::sin(lean), std::cos(lean)};
    const Point2 right{std::cos(lean), std::sin(lean)};
    const auto swing = [&](double angle, double side) {
        return std::cos(angle) * down + std::sin(angle) * side * right;
    };

    std::array<Point2, kNumJoints> p{};
    p[kNeck] = {0.0, 0.0};
    p[kHeadTop] = 0.20 * height * swing(std::numbers::pi + rng.uniform(-15.0, 15.0) * kDegree, 1.0);

    struct Side {
        double sign;
        int shoulder, elbow, wrist, hip, knee, ankle;
    };
    // The person's right side appears on the image left.
    for (const Side s : {Side{-1.0, kRightShoulder, kRightElbow, kRightWrist, kRightHip, kRightKnee, kRightAnkle},
                         Side{1.0, kLeftShoulder, kLeftElbow, kLeftWrist, kLeftHip, kLeftKnee, kLeftAnkle}}) {
        p[s.shoulder] = p[kNeck] + (0.12 * height * s.sign) * right + (0.03 * height * rng.uniform()) * down;
        const double upper_arm = rng.uniform(-15.0, 70.0) * kDegree;
        p[s.elbow] = p[s.shoulder] + 0.17 * height * swing(upper_arm, s.sign);
        const double forearm = upper_arm + rng.uniform(-10.0, 80.0) * kDegree;
        p[s.wrist] = p[s.elbow] + 0.15 * height * swing(forearm, s.sign);

        p[s.hip] = p[kNeck] + (0.35 * height) * down + (0.08 * height * s.sign) * right;
        const double thigh = rng.uniform(-10.0, 30.0) * kDegree;
        p[s.knee] = p[s.hip] + 0.24 * height * swing(thigh, s.sign);
        const double shin = thigh + rng.uniform(-25.0, 15.0) * kDegree;
        p[s.ankle] = p[s.knee] + 0.24 * height * swing(shin, s.sign);
    }

    Pose pose;
    for (int j = 0; j < kNumJoints; ++j) pose.joints[j] = PoseJoint{p[j], 1.0, std::nullopt};
    return pose;
}

Point2 box_center(const BoundingBox& b) { return {0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max)}; }

}  // namespace

GeneratedScene generate_scene(const SynthConfig& cfg)
{
    cfg.validate();
    CounterRng rng(cfg.seed, 0);

    GeneratedScene out;
    out.requested_persons = rng.uniform_int(cfg.min_persons, cfg.max_persons);
    SceneAnnotation& scene = out.scene;
    scene.image_id = "synth-" + std::to_string(cfg.seed);
    scene.image_width = cfg.image_width;
    scene.image_height = cfg.image_height;

    std::vector<Point2> centers;
    for (int k = 0; k < out.requested_persons; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
            Pose figure = sample_figure(rng, rng.uniform(cfg.min_person_height, cfg.max_person_height));
            const BoundingBox local = *figure.joint_bounds();
            const double x_lo = kMargin - local.x_min;
            const double x_hi = cfg.image_width - kMargin - local.x_max;
            const double y_lo = kMargin - local.y_min;
            const double y_hi = cfg.image_height - kMargin - local.y_max;
            if (x_hi < x_lo || y_hi < y_lo) continue;
            const Point2 offset{rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)};
            const Point2 center = box_center(local) + offset;
            const bool separated = std::all_of(centers.begin(), centers.end(), [&](Point2 c) {
                return distance(c, center) >= cfg.min_separation;
            });
            if (!separated) continue;

            for (auto& j : figure.joints) j->location = j->location + offset;
            scene.boxes.push_back(*figure.joint_bounds());
            scene.persons.push_back(std::move(figure));
            centers.push_back(center);
            placed = true;
        }
        if (!placed) break;
    }
    return out;
}

PerturbedMaps perturb_fields(const FieldMaps& maps, const SceneAnnotation& scene, const SynthConfig& cfg,
                             const EncoderConfig& encoder, const Skeleton& skeleton)
{
    cfg.validate();
    check_field_maps(maps);
    PerturbedMaps out{maps, {}};
    const float amplitude = static_cast<float>(cfg.noise_amplitude);

    if (cfg.noise_amplitude > 0.0) {
        std::uint64_t stream = 1;
        for (FieldGrid& map : out.maps.confidence) {
            CounterRng rng(cfg.seed, stream++);
            for (float& v : map.values()) {
                v = std::clamp(v + static_cast<float>(rng.uniform(-1.0, 1.0)) * amplitude, 0.0f, 1.0f);
            }
        }
        for (FieldGrid& field : out.maps.direction) {
            CounterRng rng(cfg.seed, stream++);
            for (float& v : field.values()) v += static_cast<float>(rng.uniform(-1.0, 1.0)) * amplitude;
        }
    }

    if (cfg.occlusion) {
        CounterRng rng(cfg.seed, 1000);
        const int limb_class = cfg.occlusion->limb_class;
        const Limb limb = skeleton.limbs[limb_class];
        FieldGrid& field = out.maps.direction[limb_class];
        for (std::size_t k = 0; k < scene.persons.size(); ++k) {
            if (rng.uniform() >= cfg.occlusion->probability) continue;
            const auto& a = scene.persons[k].joints[limb.parent];
            const auto& b = scene.persons[k].joints[limb.child];
            if (!a || !b) continue;
            out.occluded_persons.push_back(static_cast<int>(k));
            for (int y = 0; y < field.height(); ++y) {
                for (int x = 0; x < field.width(); ++x) {
                    if (!in_limb_rectangle(field.cell_center(x, y), a->location, b->location, encoder.delta)) continue;
                    field.at(x, y, 0) = 0.0f;
                    field.at(x, y, 1) = 0.0f;
                }
            }
        }
    }
    return out;
}

}  // namespace bbpose
