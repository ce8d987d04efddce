// SPDX-License-Identifier: Apache-2.0
#include "bbpose/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace bbpose::io {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'F', 'T', '1'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void put_u32(std::ostream& out, std::uint32_t v)
{
    const std::array<char, 4> bytes = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                       static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes.data(), bytes.size());
}

std::uint32_t get_u32(std::istream& in)
{
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw DataError("tensor: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t element_count(const std::vector<std::uint32_t>& dims)
{
    std::uint64_t n = 1;
    for (std::uint32_t d : dims) {
        n *= d;
        if (n > kMaxElements) throw DataError("tensor: too many elements");
    }
    return n;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& tensor)
{
    if (element_count(tensor.dims) != tensor.values.size()) {
        throw DataError("tensor: value count does not match dims");
    }
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::uint32_t d : tensor.dims) put_u32(out, d);

    std::vector<char> payload(tensor.values.size() * 4);
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(tensor.values[i]);
        for (int b = 0; b < 4; ++b) payload[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("tensor: write failed");
}

Tensor read_tensor(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("tensor: bad magic");
    const std::uint32_t rank = get_u32(in);
    if (rank > 16) throw DataError("tensor: implausible rank " + std::to_string(rank));
    Tensor t;
    for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(get_u32(in));
    const std::uint64_t n = element_count(t.dims);

    std::vector<unsigned char> payload(n * 4);
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
        throw DataError("tensor: truncated payload");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("tensor: trailing bytes");
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
        t.values[i] = std::bit_cast<float>(bits);
    }
    return t;
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_tensor(out, tensor);
}

Tensor read_tensor_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return read_tensor(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

Tensor to_tensor(const FieldGrid& grid)
{
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())};
    if (grid.channels() == 2) t.dims.push_back(2);
    t.values.assign(grid.values().begin(), grid.values().end());
    return t;
}

FieldGrid to_grid(const Tensor& tensor, int stride)
{
    const bool scalar = tensor.dims.size() == 2;
    const bool vector = tensor.dims.size() == 3 && tensor.dims[2] == 2;
    if (!scalar && !vector) throw DataError("tensor: expected shape [h, w] or [h, w, 2]");
    try {
        return FieldGrid(static_cast<int>(tensor.dims[1]), static_cast<int>(tensor.dims[0]), scalar ? 1 : 2, stride,
                         tensor.values);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("tensor: ") + e.what());
    }
}

nlohmann::json scene_to_json(const SceneAnnotation& scene)
{
    using nlohmann::json;
    json doc;
    doc["image_id"] = scene.image_id;
    doc["image_width"] = scene.image_width;
    doc["image_height"] = scene.image_height;

    json persons = json::array();
    json joint_scores = json::array();
    bool any_score = false;
    for (const Pose& pose : scene.persons) {
        json joints = json::array();
        json scores = json::array();
        for (const auto& j : pose.joints) {
            if (j) {
                joints.push_back({j->location.x, j->location.y, 1});
                scores.push_back(j->score);
                any_score = any_score || j->score != 1.0;
            } else {
                joints.push_back({0.0, 0.0, 0});
                scores.push_back(0.0);
            }
        }
        persons.push_back(std::move(joints));
        joint_scores.push_back(std::move(scores));
    }
    doc["persons"] = std::move(persons);
    if (any_score) doc["joint_scores"] = std::move(joint_scores);

    json boxes = json::array();
    for (const BoundingBox& b : scene.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    doc["boxes"] = std::move(boxes);
    if (!scene.box_scores.empty()) doc["box_scores"] = scene.box_scores;
    if (!scene.scores.empty()) doc["scores"] = scene.scores;
    return doc;
}

namespace {

double finite_number(const nlohmann::json& v, const char* what)
{
    if (!v.is_number()) throw DataError(std::string("scene: ") + what + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw DataError(std::string("scene: ") + what + " must be finite");
    return d;
}

std::vector<double> number_list(const nlohmann::json& doc, const char* key)
{
    std::vector<double> out;
    if (!doc.contains(key)) return out;
    if (!doc[key].is_array()) throw DataError(std::string("scene: ") + key + " must be an array");
    for (const auto& v : doc[key]) out.push_back(finite_number(v, key));
    return out;
}

}  // namespace

SceneAnnotation scene_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) throw DataError("scene: document must be an object");
    SceneAnnotation scene;
    if (doc.contains("image_id")) {
        if (!doc["image_id"].is_string()) throw DataError("scene: image_id must be a string");
        scene.image_id = doc["image_id"].get<std::string>();
    }
    for (const char* key : {"image_width", "image_height"}) {
        if (!doc.contains(key) || !doc[key].is_number_integer() || doc[key].get<long long>() < 0 ||
            doc[key].get<long long>() > (1 << 20)) {
            throw DataError(std::string("scene: ") + key + " must be a non-negative integer");
        }
    }
    scene.image_width = doc["image_width"].get<int>();
    scene.image_height = doc["image_height"].get<int>();

    const nlohmann::json persons = doc.value("persons", nlohmann::json::array());
    if (!persons.is_array()) throw DataError("scene: persons must be an array");
    const nlohmann::json joint_scores = doc.value("joint_scores", nlohmann::json::array());
    if (!joint_scores.is_array() || (!joint_scores.empty() && joint_scores.size() != persons.size())) {
        throw DataError("scene: joint_scores must have one row per person");
    }
    for (std::size_t k = 0; k < persons.size(); ++k) {
        const auto& joints = persons[k];
        if (!joints.is_array() || joints.size() != kNumJoints) throw DataError("scene: each person needs 14 joints");
        if (!joint_scores.empty() && (!joint_scores[k].is_array() || joint_scores[k].size() != kNumJoints)) {
            throw DataError("scene: each joint_scores row needs 14 values");
        }
        Pose pose;
        for (int j = 0; j < kNumJoints; ++j) {
            const auto& t = joints[j];
            if (!t.is_array() || t.size() != 3) throw DataError("scene: joints are [x, y, visibility] triples");
            const double x = finite_number(t[0], "joint x");
            const double y = finite_number(t[1], "joint y");
            if (!t[2].is_number_integer()) throw DataError("scene: visibility must be 0 or 1");
            const int v = t[2].get<int>();
            if (v == 0) continue;
            if (v != 1) throw DataError("scene: visibility must be 0 or 1");
            const double score = joint_scores.empty() ? 1.0 : finite_number(joint_scores[k][j], "joint score");
            pose.joints[j] = PoseJoint{{x, y}, score, std::nullopt};
        }
        scene.persons.push_back(std::move(pose));
    }

    const nlohmann::json boxes = doc.value("boxes", nlohmann::json::array());
    if (!boxes.is_array()) throw DataError("scene: boxes must be an array");
    for (const auto& b : boxes) {
        if (!b.is_array() || b.size() != 4) throw DataError("scene: boxes are [x_min, y_min, x_max, y_max]");
        BoundingBox box{finite_number(b[0], "box"), finite_number(b[1], "box"), finite_number(b[2], "box"),
                        finite_number(b[3], "box")};
        if (!box.valid()) throw DataError("scene: box needs x_min < x_max and y_min < y_max");
        scene.boxes.push_back(box);
    }
    scene.box_scores = number_list(doc, "box_scores");
    if (!scene.box_scores.empty() && scene.box_scores.size() != scene.boxes.size()) {
        throw DataError("scene: box_scores must have one entry per box");
    }
    scene.scores = number_list(doc, "scores");
    if (!scene.scores.empty() && scene.scores.size() != scene.persons.size()) {
        throw DataError("scene: scores must have one entry per person");
    }
    return scene;
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << doc.dump(1) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

void write_scene_file(const std::filesystem::path& path, const SceneAnnotation& scene)
{
    write_json_file(path, scene_to_json(scene));
}

SceneAnnotation read_scene_file(const std::filesystem::path& path)
{
    try {
        return scene_from_json(read_json_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<SceneAnnotation> read_scene_collection(const std::filesystem::path& path)
{
    std::vector<SceneAnnotation> scenes;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) scenes.push_back(read_scene_file(f));
        return scenes;
    }
    const nlohmann::json doc = read_json_file(path);
    try {
        if (doc.is_array()) {
            for (const auto& s : doc) scenes.push_back(scene_from_json(s));
        } else {
            scenes.push_back(scene_from_json(doc));
        }
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return scenes;
}

}  // namespace bbpose::io
