// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file render.hpp
/// \brief Skeleton overlays on a blank raster.

#include <cstdint>
#include <iosfwd>

#include "bbpose/core.hpp"

namespace bbpose {

struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  ///< Row-major, 3 bytes per pixel.

    friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

struct RenderStats {
    int segments = 0;
    int markers = 0;
};

/// Draws every person's limbs (both endpoints present) and joints, one fixed
/// palette color per person index, over a black canvas of the scene size.
RasterImage render_scene(const SceneAnnotation& scene, const Skeleton& skeleton, RenderStats* stats = nullptr);

/// Binary PPM (P6).
void write_ppm(std::ostream& out, const RasterImage& image);

}  // namespace bbpose
