// SPDX-License-Identifier: Apache-2.0
#include "bbpose/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bbpose {

void EncoderConfig::validate() const
{
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
}

namespace {

// Inclusive cell range whose centers may fall within [lo, hi] pixels.
std::pair<int, int> cell_span(double lo, double hi, int stride, int cells)
{
    const int first = std::max(0, static_cast<int>(std::floor(lo / stride - 0.5)));
    const int last = std::min(cells - 1, static_cast<int>(std::ceil(hi / stride - 0.5)));
    return {first, last};
}

}  // namespace

std::vector<FieldGrid> encode_confidence_maps(const SceneAnnotation& scene, const EncoderConfig& cfg)
{
    cfg.validate();
    std::vector<FieldGrid> maps(kNumJoints,
                                FieldGrid::for_image(scene.image_width, scene.image_height, 1, cfg.stride));
    const FieldGrid& shape = maps.front();
    const double sigma2 = cfg.sigma * cfg.sigma;
    const double radius = cfg.sigma * std::sqrt(-std::log(kGaussianFloor));

    for (const Pose& person : scene.persons) {
        for (int j = 0; j < kNumJoints; ++j) {
            if (!person.joints[j]) continue;
            const Point2 c = person.joints[j]->location;
            FieldGrid& map = maps[j];
            const auto [x0, x1] = cell_span(c.x - radius, c.x + radius, cfg.stride, shape.width());
            const auto [y0, y1] = cell_span(c.y - radius, c.y + radius, cfg.stride, shape.height());
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const Point2 d = map.cell_center(x, y) - c;
                    const double value = std::exp(-dot(d, d) / sigma2);
                    if (value < kGaussianFloor) continue;
                    float& cell = map.at(x, y);
                    cell = std::max(cell, static_cast<float>(value));
                }
            }
        }
    }
    return maps;
}

bool in_limb_rectangle(Point2 p, Point2 from, Point2 to, double delta)
{
    const Point2 d = to - from;
    const double length = norm(d);
    if (length == 0.0) return false;
    const Point2 v = (1.0 / length) * d;
    const Point2 r = p - from;
    const double along = dot(r, v);
    const double across = r.x * -v.y + r.y * v.x;
    return along >= 0.0 && along <= length && std::abs(across) <= delta;
}

std::vector<FieldGrid> encode_direction_fields(const SceneAnnotation& scene, const EncoderConfig& cfg,
                                               const Skeleton& skeleton, EncodeDiagnostics* diagnostics)
{
    cfg.validate();
    const FieldGrid shape = FieldGrid::for_image(scene.image_width, scene.image_height, 1, cfg.stride);
    std::vector<FieldGrid> fields;
    fields.reserve(kNumLimbs);

    std::vector<double> sum_x(shape.cell_count());
    std::vector<double> sum_y(shape.cell_count());
    std::vector<int> count(shape.cell_count());

    for (int c = 0; c < kNumLimbs; ++c) {
        std::fill(sum_x.begin(), sum_x.end(), 0.0);
        std::fill(sum_y.begin(), sum_y.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        const Limb limb = skeleton.limbs[c];

        for (const Pose& person : scene.persons) {
            const auto& a = person.joints[limb.parent];
            const auto& b = person.joints[limb.child];
            if (!a || !b) continue;
            const Point2 from = a->location;
            const Point2 to = b->location;
            const double length = distance(from, to);
            if (length == 0.0) {
                if (diagnostics) ++diagnostics->skipped_degenerate_limbs;
                continue;
            }
            const Point2 v = (1.0 / length) * (to - from);
            const auto [x0, x1] = cell_span(std::min(from.x, to.x) - cfg.delta, std::max(from.x, to.x) + cfg.delta,
                                            cfg.stride, shape.width());
            const auto [y0, y1] = cell_span(std::min(from.y, to.y) - cfg.delta, std::max(from.y, to.y) + cfg.delta,
                                            cfg.stride, shape.height());
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (!in_limb_rectangle(shape.cell_center(x, y), from, to, cfg.delta)) continue;
                    const std::size_t i = static_cast<std::size_t>(y) * shape.width() + x;
                    sum_x[i] += v.x;
                    sum_y[i] += v.y;
                    ++count[i];
                }
            }
        }

        FieldGrid field(shape.width(), shape.height(), 2, cfg.stride);
        auto out = field.values();
        for (std::size_t i = 0; i < count.size(); ++i) {
            if (count[i] == 0) continue;
            out[2 * i] = static_cast<float>(sum_x[i] / count[i]);
            out[2 * i + 1] = static_cast<float>(sum_y[i] / count[i]);
        }
        fields.push_back(std::move(field));
    }
    return fields;
}

FieldMaps encode_scene(const SceneAnnotation& scene, const EncoderConfig& cfg, const Skeleton& skeleton,
                       EncodeDiagnostics* diagnostics)
{
    return {encode_confidence_maps(scene, cfg), encode_direction_fields(scene, cfg, skeleton, diagnostics)};
}

FieldGrid background_map(std::span<const FieldGrid> confidence_maps)
{
    if (confidence_maps.empty()) throw std::invalid_argument("background_map: no confidence maps");
    const FieldGrid& ref = confidence_maps.front();
    for (const FieldGrid& m : confidence_maps) {
        if (m.channels() != 1 || !m.same_shape(ref)) throw std::invalid_argument("background_map: shape mismatch");
    }
    FieldGrid background(ref.width(), ref.height(), 1, ref.stride());
    auto out = background.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        float peak = 0.0f;
        for (const FieldGrid& m : confidence_maps) peak = std::max(peak, m.values()[i]);
        out[i] = 1.0f - peak;
    }
    return background;
}

namespace {

void require_shape(const FieldGrid& g, const FieldGrid& mask, int channels, const char* what)
{
    if (g.channels() != channels || g.width() != mask.width() || g.height() != mask.height()) {
        throw std::invalid_argument(std::string("supervision_loss: shape mismatch in ") + what);
    }
}

double masked_squared_error(const FieldGrid& a, const FieldGrid& b, const FieldGrid* mask)
{
    const auto av = a.values();
    const auto bv = b.values();
    const int ch = a.channels();
    double total = 0.0;
    for (std::size_t cell = 0; cell < a.cell_count(); ++cell) {
        const double w = mask ? mask->values()[cell] : 1.0;
        if (w == 0.0) continue;
        double e = 0.0;
        for (int c = 0; c < ch; ++c) {
            const double d = static_cast<double>(av[cell * ch + c]) - bv[cell * ch + c];
            e += d * d;
        }
        total += w * e;
    }
    return total;
}

}  // namespace

StageLoss supervision_loss(const FieldMaps& predicted, const FieldGrid& predicted_background,
                           const FieldMaps& target, const FieldGrid& target_background, const LossWeights& weights)
{
    if (!(weights.lambda >= 0.0)) throw std::invalid_argument("supervision_loss: lambda must be >= 0");
    const FieldGrid& mask = weights.mask;
    if (mask.empty() || mask.channels() != 1) throw std::invalid_argument("supervision_loss: mask must be scalar");
    if (predicted.confidence.size() != target.confidence.size() ||
        predicted.direction.size() != target.direction.size()) {
        throw std::invalid_argument("supervision_loss: map count mismatch");
    }
    require_shape(predicted_background, mask, 1, "predicted background");
    require_shape(target_background, mask, 1, "target background");

    StageLoss loss;
    for (std::size_t j = 0; j < predicted.confidence.size(); ++j) {
        require_shape(predicted.confidence[j], mask, 1, "confidence map");
        require_shape(target.confidence[j], mask, 1, "confidence map");
        loss.confidence += masked_squared_error(predicted.confidence[j], target.confidence[j], &mask);
    }
    loss.confidence += weights.lambda * masked_squared_error(predicted_background, target_background, nullptr);
    for (std::size_t c = 0; c < predicted.direction.size(); ++c) {
        require_shape(predicted.direction[c], mask, 2, "direction field");
        require_shape(target.direction[c], mask, 2, "direction field");
        loss.direction += masked_squared_error(predicted.direction[c], target.direction[c], &mask);
    }
    return loss;
}

}  // namespace bbpose
