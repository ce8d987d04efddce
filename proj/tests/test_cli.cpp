// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bbpose/cli.hpp"
#include "bbpose/io.hpp"
#include "bbpose/render.hpp"
#include "support.hpp"

using namespace bbpose;
using namespace bbpose::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const Skeleton kSkeleton = canonical_skeleton();

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("bbpose_cli_" + std::to_string(CounterRng(std::random_device{}()).next()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args)
{
    args.insert(args.begin(), "bbpose");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string file_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SceneAnnotation one_person_scene(std::uint64_t seed)
{
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.min_persons = cfg.max_persons = 1;
    return generate_scene(cfg).scene;
}

std::vector<std::string> sorted_listing(const fs::path& dir)
{
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir)) names.push_back(fs::relative(e.path(), dir).string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

TEST_CASE("usage errors")
{
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run({"encode"}).code == cli::kExitUsage);
    CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("encode writes 28 tensors and a manifest that re-read bit-exactly")
{
    TempDir dir;
    const SceneAnnotation scene = one_person_scene(2);
    io::write_scene_file(dir.path / "scene.json", scene);
    REQUIRE(run({"encode", (dir.path / "scene.json").string(), (dir.path / "t").string()}).code == 0);

    int tensors = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "t")) tensors += e.path().extension() == ".pft" ? 1 : 0;
    CHECK(tensors == 28);
    CHECK(fs::exists(dir.path / "t" / "manifest.json"));

    const cli::TensorSet set = cli::read_tensor_set(dir.path / "t");
    const FieldMaps expected = encode_scene(scene, {}, kSkeleton);
    CHECK(set.maps.confidence == expected.confidence);
    CHECK(set.maps.direction == expected.direction);
    CHECK(set.background == background_map(expected.confidence));
    CHECK(set.manifest["sigma"] == 7.0);
    CHECK(set.manifest["image_id"] == scene.image_id);
}

TEST_CASE("encode with extra options and scales")
{
    TempDir dir;
    io::write_scene_file(dir.path / "scene.json", one_person_scene(3));
    REQUIRE(run({"encode", (dir.path / "scene.json").string(), (dir.path / "t").string(), "--stride", "4", "--sigma",
                 "5", "--scales", "0.7,1.0"})
                .code == 0);
    const json manifest = io::read_json_file(dir.path / "t" / "manifest.json");
    CHECK(manifest["stride"] == 4);
    CHECK(manifest["grid_width"] == 212);
    CHECK(manifest["scales"].size() == 2);
    CHECK(fs::exists(dir.path / "t" / manifest["scales"][0]["directory"].get<std::string>() / "manifest.json"));
    CHECK(run({"encode", (dir.path / "scene.json").string(), (dir.path / "u").string(), "--stride", "0"}).code ==
          cli::kExitUsage);
}

TEST_CASE("encode reports missing and malformed input")
{
    TempDir dir;
    const Outcome missing = run({"encode", (dir.path / "nope.json").string(), (dir.path / "t").string()});
    CHECK(missing.code == cli::kExitData);
    CHECK_FALSE(missing.err.empty());
    std::ofstream(dir.path / "bad.json") << R"({"image_width": 10})";
    CHECK(run({"encode", (dir.path / "bad.json").string(), (dir.path / "t").string()}).code == cli::kExitData);
}

TEST_CASE("the installed tool exits nonzero on a missing file")
{
    TempDir dir;
    const std::string cmd = std::string("\"") + BBPOSE_TOOL_PATH + "\" encode \"" + (dir.path / "nope.json").string() +
                            "\" \"" + (dir.path / "t").string() + "\" 2>/dev/null";
    const int status = std::system(cmd.c_str());
    CHECK(status != 0);
    CHECK(WEXITSTATUS(status) == cli::kExitData);
}

TEST_CASE("parse recovers an encoded person from its box")
{
    TempDir dir;
    const SceneAnnotation scene = one_person_scene(8);
    io::write_scene_file(dir.path / "scene.json", scene);
    REQUIRE(run({"encode", (dir.path / "scene.json").string(), (dir.path / "t").string()}).code == 0);
    REQUIRE(run({"parse", (dir.path / "t").string(), (dir.path / "scene.json").string(),
                 (dir.path / "pred.json").string()})
                .code == 0);
    const SceneAnnotation pred = io::read_scene_file(dir.path / "pred.json");
    REQUIRE(pred.persons.size() == 1);
    CHECK(pred.scores.size() == 1);
    CHECK(pred.image_id == scene.image_id);
    for (int j = 0; j < kNumJoints; ++j) {
        REQUIRE(pred.persons[0].joints[j]);
        CHECK(distance(pred.persons[0].joints[j]->location, scene.persons[0].joints[j]->location) <= 1.0);
    }

    SUBCASE("eval of the prediction")
    {
        const Outcome r = run({"eval", (dir.path / "pred.json").string(), (dir.path / "scene.json").string()});
        REQUIRE(r.code == 0);
        const json report = json::parse(r.out);
        CHECK(report["ap"].get<double>() == doctest::Approx(1.0));
        CHECK(report["matched"] == 1);
        CHECK(report["ap_per_threshold"].size() == 10);
    }
    SUBCASE("duplicated boxes with and without NMS")
    {
        SceneAnnotation doubled = scene;
        doubled.boxes.push_back(scene.boxes[0]);
        io::write_scene_file(dir.path / "boxes2.json", doubled);
        REQUIRE(run({"parse", (dir.path / "t").string(), (dir.path / "boxes2.json").string(),
                     (dir.path / "p1.json").string()})
                    .code == 0);
        REQUIRE(run({"parse", (dir.path / "t").string(), (dir.path / "boxes2.json").string(),
                     (dir.path / "p2.json").string(), "--no-nms"})
                    .code == 0);
        CHECK(io::read_scene_file(dir.path / "p1.json").persons.size() == 1);
        CHECK(io::read_scene_file(dir.path / "p2.json").persons.size() == 2);
    }
    SUBCASE("empty boxes file")
    {
        SceneAnnotation none = scene;
        none.persons.clear();
        none.boxes.clear();
        io::write_scene_file(dir.path / "none.json", none);
        const Outcome r = run({"parse", (dir.path / "t").string(), (dir.path / "none.json").string(),
                               (dir.path / "p.json").string()});
        CHECK(r.code == 0);
        CHECK(io::read_scene_file(dir.path / "p.json").persons.empty());
    }
    SUBCASE("bad options")
    {
        CHECK(run({"parse", (dir.path / "t").string(), (dir.path / "scene.json").string(),
                   (dir.path / "p.json").string(), "--eta", "2"})
                  .code == cli::kExitUsage);
        CHECK(run({"parse", (dir.path / "nope").string(), (dir.path / "scene.json").string(),
                   (dir.path / "p.json").string()})
                  .code == cli::kExitData);
    }
}

TEST_CASE("parse fuses encoded scales")
{
    TempDir dir;
    const SceneAnnotation scene = one_person_scene(9);
    io::write_scene_file(dir.path / "scene.json", scene);
    REQUIRE(run({"encode", (dir.path / "scene.json").string(), (dir.path / "t").string(), "--scales", "0.7,1.0,1.3"})
                .code == 0);
    REQUIRE(run({"parse", (dir.path / "t").string(), (dir.path / "scene.json").string(),
                 (dir.path / "pred.json").string()})
                .code == 0);
    const SceneAnnotation pred = io::read_scene_file(dir.path / "pred.json");
    REQUIRE(pred.persons.size() == 1);
    CHECK(oks(pred.persons[0], scene.persons[0], scene.boxes[0], {}) >= 0.9);
    CHECK(run({"parse", (dir.path / "t").string(), (dir.path / "scene.json").string(),
               (dir.path / "pred.json").string(), "--scales", "0.5"})
              .code != 0);
}

TEST_CASE("eval edge cases")
{
    TempDir dir;
    SceneAnnotation gt = one_person_scene(4);
    io::write_scene_file(dir.path / "gt.json", gt);
    io::write_json_file(dir.path / "empty.json", json::array());
    const Outcome empty = run({"eval", (dir.path / "empty.json").string(), (dir.path / "gt.json").string()});
    REQUIRE(empty.code == 0);
    CHECK(json::parse(empty.out)["ap"] == 0.0);

    SceneAnnotation other = gt;
    other.image_id = "elsewhere";
    io::write_scene_file(dir.path / "other.json", other);
    const Outcome mismatch = run({"eval", (dir.path / "other.json").string(), (dir.path / "gt.json").string()});
    CHECK(mismatch.code == cli::kExitData);
    CHECK(mismatch.err.find("elsewhere") != std::string::npos);

    io::write_json_file(dir.path / "k.json", json{{"k", std::vector<double>(14, 0.5)}});
    CHECK(run({"eval", (dir.path / "gt.json").string(), (dir.path / "gt.json").string(), "--oks-config",
               (dir.path / "k.json").string()})
              .code == 0);
    io::write_json_file(dir.path / "k3.json", json{{"k", std::vector<double>(3, 0.5)}});
    CHECK(run({"eval", (dir.path / "gt.json").string(), (dir.path / "gt.json").string(), "--oks-config",
               (dir.path / "k3.json").string()})
              .code != 0);
}

TEST_CASE("synth corpus")
{
    TempDir dir;
    const auto synth = [&](const std::string& name, std::vector<std::string> extra) {
        std::vector<std::string> args = {"synth", (dir.path / name).string(), "--seed", "1", "--scenes", "3"};
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args).code;
    };
    REQUIRE(synth("a", {}) == 0);
    REQUIRE(synth("b", {}) == 0);
    const auto files = sorted_listing(dir.path / "a");
    CHECK(files == sorted_listing(dir.path / "b"));
    for (const std::string& f : files) {
        if (fs::is_regular_file(dir.path / "a" / f)) CHECK(file_bytes(dir.path / "a" / f) == file_bytes(dir.path / "b" / f));
    }
    int scene_files = 0;
    for (const std::string& f : files) scene_files += fs::path(f).filename() == "scene.json" ? 1 : 0;
    CHECK(scene_files == 3);

    SUBCASE("thread count does not change output")
    {
        ::setenv("BBPOSE_THREADS", "1", 1);
        REQUIRE(synth("c", {}) == 0);
        ::unsetenv("BBPOSE_THREADS");
        for (const std::string& f : files) {
            if (fs::is_regular_file(dir.path / "a" / f)) CHECK(file_bytes(dir.path / "a" / f) == file_bytes(dir.path / "c" / f));
        }
    }
    SUBCASE("occlusion is recorded")
    {
        REQUIRE(synth("o", {"--occlude-limb", "3", "--persons", "2"}) == 0);
        const json corpus = io::read_json_file(dir.path / "o" / "corpus.json");
        REQUIRE(corpus["scenes"].size() == 3);
        for (const json& s : corpus["scenes"]) CHECK(s["occluded_persons"] == json::array({0, 1}));
    }
    SUBCASE("bad ranges")
    {
        CHECK(synth("x", {"--persons", "4-2"}) == cli::kExitUsage);
        CHECK(synth("x", {"--occlude-limb", "13"}) == cli::kExitUsage);
    }
    SUBCASE("synth output parses and evaluates")
    {
        const fs::path scene_dir = dir.path / "a" / "scene_0000";
        REQUIRE(run({"parse", scene_dir.string(), (scene_dir / "scene.json").string(),
                     (dir.path / "pred.json").string()})
                    .code == 0);
        const Outcome r = run({"eval", (dir.path / "pred.json").string(), (scene_dir / "scene.json").string()});
        REQUIRE(r.code == 0);
        CHECK(json::parse(r.out)["ap"].get<double>() >= 0.95);
    }
}

TEST_CASE("synth --scenes 50 writes 50 scene files")
{
    TempDir dir;
    REQUIRE(run({"synth", dir.path.string(), "--scenes", "50", "--width", "160", "--height", "120", "--persons", "1",
                 "--min-person-height", "60", "--max-person-height", "80"})
                .code == 0);
    int scenes = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir.path)) scenes += e.path().filename() == "scene.json" ? 1 : 0;
    CHECK(scenes == 50);
}

TEST_CASE("render")
{
    TempDir dir;
    const SceneAnnotation scene = one_person_scene(5);
    RenderStats stats;
    const RasterImage image = render_scene(scene, kSkeleton, &stats);
    CHECK(stats.segments == 13);
    CHECK(stats.markers == 14);
    CHECK(image.width == scene.image_width);
    CHECK(std::any_of(image.rgb.begin(), image.rgb.end(), [](std::uint8_t v) { return v != 0; }));

    io::write_scene_file(dir.path / "s.json", scene);
    REQUIRE(run({"render", (dir.path / "s.json").string(), (dir.path / "a.ppm").string()}).code == 0);
    REQUIRE(run({"render", (dir.path / "s.json").string(), (dir.path / "b.ppm").string()}).code == 0);
    const std::string a = file_bytes(dir.path / "a.ppm");
    CHECK(a == file_bytes(dir.path / "b.ppm"));
    CHECK(a.rfind("P6\n", 0) == 0);

    SceneAnnotation empty = scene;
    empty.persons.clear();
    empty.boxes.clear();
    RenderStats none;
    const RasterImage blank = render_scene(empty, kSkeleton, &none);
    CHECK(none.segments == 0);
    CHECK(std::all_of(blank.rgb.begin(), blank.rgb.end(), [](std::uint8_t v) { return v == 0; }));
    io::write_scene_file(dir.path / "e.json", empty);
    CHECK(run({"render", (dir.path / "e.json").string(), (dir.path / "e.ppm").string()}).code == 0);
}

TEST_CASE("thread count from the environment")
{
    ::setenv("BBPOSE_THREADS", "3", 1);
    CHECK(cli::default_thread_count() == 3);
    ::setenv("BBPOSE_THREADS", "junk", 1);
    CHECK(cli::default_thread_count() >= 1);
    ::unsetenv("BBPOSE_THREADS");
    CHECK(cli::default_thread_count() >= 1);
}
