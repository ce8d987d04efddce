// SPDX-License-Identifier: Apache-2.0
#pragma once

/// \file io.hpp
/// \brief Binary tensor files and JSON scene files.
///
/// Tensor file layout (all integers and floats little-endian):
///
///     "PFT1" | u32 rank | rank x u32 dims | prod(dims) x f32 values
///
/// Scalar maps are stored as [height, width], vector fields as
/// [height, width, 2], row-major.
///
/// Scene files are JSON objects:
///
///     {"image_id": "...", "image_width": W, "image_height": H,
///      "persons": [[[x, y, v] x 14], ...],      v: 0 absent, 1 visible
///      "joint_scores": [[s x 14], ...],         optional
///      "boxes": [[x_min, y_min, x_max, y_max], ...],
///      "box_scores": [...],                     optional
///      "scores": [...]}                         optional, pose confidences
///
/// Candidate ids and pose source boxes are not stored.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include <json.hpp>

#include "bbpose/core.hpp"

namespace bbpose::io {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);
void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor_file(const std::filesystem::path& path);

Tensor to_tensor(const FieldGrid& grid);
/// Throws DataError unless the tensor is [h, w] or [h, w, 2].
FieldGrid to_grid(const Tensor& tensor, int stride);

nlohmann::json scene_to_json(const SceneAnnotation& scene);
/// Throws DataError on schema violations.
SceneAnnotation scene_from_json(const nlohmann::json& doc);

void write_scene_file(const std::filesystem::path& path, const SceneAnnotation& scene);
SceneAnnotation read_scene_file(const std::filesystem::path& path);

/// Reads a single scene object, a JSON array of scenes, or every *.json
/// scene file of a directory (in file-name order).
std::vector<SceneAnnotation> read_scene_collection(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace bbpose::io
