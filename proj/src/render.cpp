// SPDX-License-Identifier: Apache-2.0
#include "bbpose/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bbpose {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr std::array<Color, 8> kPalette = {{
    {230, 25, 75},
    {60, 180, 75},
    {255, 225, 25},
    {0, 130, 200},
    {245, 130, 48},
    {145, 30, 180},
    {70, 240, 240},
    {240, 50, 230},
}};

void put_pixel(RasterImage& img, int x, int y, const Color& c)
{
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * img.width + x);
    std::copy(c.begin(), c.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(i));
}

void draw_disc(RasterImage& img, Point2 center, int radius, const Color& c)
{
    const int cx = static_cast<int>(std::floor(center.x));
    const int cy = static_cast<int>(std::floor(center.y));
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) put_pixel(img, cx + dx, cy + dy, c);
        }
    }
}

// Bresenham with a 1-pixel brush on each side.
void draw_line(RasterImage& img, Point2 a, Point2 b, const Color& c)
{
    const double limit = 4.0 * std::max(img.width, img.height);
    for (const Point2 p : {a, b}) {
        if (std::abs(p.x) > limit || std::abs(p.y) > limit) return;
    }
    int x0 = static_cast<int>(std::floor(a.x));
    int y0 = static_cast<int>(std::floor(a.y));
    const int x1 = static_cast<int>(std::floor(b.x));
    const int y1 = static_cast<int>(std::floor(b.y));
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        draw_disc(img, {x0 + 0.5, y0 + 0.5}, 1, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

RasterImage render_scene(const SceneAnnotation& scene, const Skeleton& skeleton, RenderStats* stats)
{
    if (scene.image_width <= 0 || scene.image_height <= 0) throw std::invalid_argument("render: empty canvas");
    RasterImage img{scene.image_width, scene.image_height,
                    std::vector<std::uint8_t>(static_cast<std::size_t>(scene.image_width) * scene.image_height * 3, 0)};
    RenderStats local;
    for (std::size_t k = 0; k < scene.persons.size(); ++k) {
        const Pose& pose = scene.persons[k];
        const Color& color = kPalette[k % kPalette.size()];
        for (const Limb& limb : skeleton.limbs) {
            const auto& a = pose.joints[limb.parent];
            const auto& b = pose.joints[limb.child];
            if (!a || !b) continue;
            draw_line(img, a->location, b->location, color);
            ++local.segments;
        }
        for (const auto& j : pose.joints) {
            if (!j) continue;
            draw_disc(img, j->location, 3, {255, 255, 255});
            ++local.markers;
        }
    }
    if (stats) *stats = local;
    return img;
}

void write_ppm(std::ostream& out, const RasterImage& image)
{
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

}  // namespace bbpose
