// SPDX-License-Identifier: Apache-2.0
#include "bbpose/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "bbpose/eval.hpp"
#include "bbpose/io.hpp"
#include "bbpose/render.hpp"
#include "bbpose/synth.hpp"

namespace bbpose::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using io::DataError;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kTensorFormat = "bbpose-tensors";

std::string indexed_name(const char* prefix, int i)
{
    std::ostringstream s;
    s << prefix << '_' << std::setw(2) << std::setfill('0') << i << ".pft";
    return s.str();
}

// Scale directory names use a fixed two-decimal format so corpora replay
// byte-identically.
std::string scale_directory(double scale)
{
    std::ostringstream s;
    s << "scale_" << std::fixed << std::setprecision(2) << scale;
    return s.str();
}

std::vector<double> parse_scale_list(const std::string& text)
{
    std::vector<double> scales;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(v > 0.0)) throw CLI::ValidationError("--scales", "bad scale '" + item + "'");
        scales.push_back(v);
    }
    if (scales.empty()) throw CLI::ValidationError("--scales", "no scales given");
    return scales;
}

SceneAnnotation scaled_scene(const SceneAnnotation& scene, double scale)
{
    SceneAnnotation s = scene;
    s.image_width = std::max(1, static_cast<int>(std::lround(scene.image_width * scale)));
    s.image_height = std::max(1, static_cast<int>(std::lround(scene.image_height * scale)));
    for (Pose& p : s.persons) {
        for (auto& j : p.joints) {
            if (j) j->location = scale * j->location;
        }
    }
    for (BoundingBox& b : s.boxes) b = {b.x_min * scale, b.y_min * scale, b.x_max * scale, b.y_max * scale};
    return s;
}

struct ParseFlags {
    PipelineConfig pipeline;
    bool no_nms = false;
    bool no_completion = false;
    std::string scales;
};

FieldMaps load_prediction(const fs::path& dir, const std::string& scales_flag, const TensorSet& base)
{
    const json& manifest = base.manifest;
    if (scales_flag.empty() && !manifest.contains("scales")) return base.maps;

    std::map<double, std::string> available;
    if (manifest.contains("scales")) {
        for (const json& entry : manifest["scales"]) {
            available.emplace(entry.at("scale").get<double>(), entry.at("directory").get<std::string>());
        }
    } else {
        available.emplace(1.0, ".");
    }

    std::vector<double> wanted;
    if (scales_flag.empty()) {
        for (const auto& [scale, _] : available) wanted.push_back(scale);
    } else {
        wanted = parse_scale_list(scales_flag);
    }

    std::vector<ScaleOutput> outputs;
    for (double scale : wanted) {
        const auto it = std::find_if(available.begin(), available.end(),
                                     [&](const auto& e) { return std::abs(e.first - scale) < 1e-9; });
        if (it == available.end()) {
            throw DataError("scale " + std::to_string(scale) + " is not listed in " + (dir / kManifestName).string());
        }
        if (it->second == ".") {
            outputs.push_back({scale, base.maps});
        } else {
            outputs.push_back({scale, read_tensor_set(dir / it->second).maps});
        }
    }
    if (outputs.size() == 1 && std::abs(outputs.front().scale - 1.0) < 1e-9) return outputs.front().maps;
    const FieldGrid& ref = base.maps.confidence.front();
    return fuse_scales(outputs, GridShape{ref.width(), ref.height(), ref.stride()});
}

json report_to_json(const EvalReport& r)
{
    return json{{"ap", r.ap},         {"ap_per_threshold", r.ap_per_threshold},
                {"mean_oks", r.mean_oks}, {"matched", r.matched},
                {"missed", r.missed}, {"spurious", r.spurious}};
}

OksConfig read_oks_config(const fs::path& path)
{
    const json doc = io::read_json_file(path);
    if (!doc.is_object() || !doc.contains("k") || !doc["k"].is_array() || doc["k"].size() != kNumJoints) {
        throw DataError(path.string() + ": expected {\"k\": [14 numbers]}");
    }
    OksConfig cfg;
    for (int j = 0; j < kNumJoints; ++j) {
        if (!doc["k"][j].is_number()) throw DataError(path.string() + ": k entries must be numbers");
        cfg.k[j] = doc["k"][j].get<double>();
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return cfg;
}

std::pair<int, int> parse_person_range(const std::string& text)
{
    const auto dash = text.find('-');
    try {
        if (dash == std::string::npos) {
            const int n = std::stoi(text);
            return {n, n};
        }
        return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--persons", "expected N or MIN-MAX, got '" + text + "'");
    }
}

// Runs job(i) for i in [0, count) on up to `threads` workers.
template <typename Job>
void parallel_for(int count, int threads, Job job)
{
    threads = std::clamp(threads, 1, std::max(1, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        for (int t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                try {
                    for (int i = next++; i < count; i = next++) job(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

int default_thread_count()
{
    if (const char* env = std::getenv("BBPOSE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0 && n < 1024) return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

json write_tensor_set(const fs::path& dir, const SceneAnnotation& scene, const EncoderConfig& cfg,
                      const FieldMaps& maps)
{
    check_field_maps(maps);
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = kTensorFormat;
    manifest["version"] = 1;
    manifest["image_id"] = scene.image_id;
    manifest["image_width"] = scene.image_width;
    manifest["image_height"] = scene.image_height;
    manifest["sigma"] = cfg.sigma;
    manifest["delta"] = cfg.delta;
    manifest["stride"] = cfg.stride;
    manifest["grid_width"] = maps.confidence.front().width();
    manifest["grid_height"] = maps.confidence.front().height();

    json confidence = json::array();
    for (int j = 0; j < kNumJoints; ++j) {
        const std::string name = indexed_name("confidence", j);
        io::write_tensor_file(dir / name, io::to_tensor(maps.confidence[j]));
        confidence.push_back(name);
    }
    json direction = json::array();
    for (int c = 0; c < kNumLimbs; ++c) {
        const std::string name = indexed_name("direction", c);
        io::write_tensor_file(dir / name, io::to_tensor(maps.direction[c]));
        direction.push_back(name);
    }
    io::write_tensor_file(dir / "background.pft", io::to_tensor(background_map(maps.confidence)));
    manifest["confidence"] = confidence;
    manifest["direction"] = direction;
    manifest["background"] = "background.pft";
    io::write_json_file(dir / kManifestName, manifest);
    return manifest;
}

TensorSet read_tensor_set(const fs::path& dir)
{
    const fs::path manifest_path = dir / kManifestName;
    if (!fs::exists(manifest_path)) throw DataError("missing " + manifest_path.string());
    TensorSet set;
    set.manifest = io::read_json_file(manifest_path);
    const json& m = set.manifest;
    try {
        if (m.at("format").get<std::string>() != kTensorFormat) throw DataError("unknown manifest format");
        const int stride = m.at("stride").get<int>();
        const int gw = m.at("grid_width").get<int>();
        const int gh = m.at("grid_height").get<int>();
        const auto& conf = m.at("confidence");
        const auto& dirn = m.at("direction");
        if (conf.size() != kNumJoints || dirn.size() != kNumLimbs) {
            throw DataError("manifest must list 14 confidence and 13 direction tensors");
        }
        auto load = [&](const json& name, int channels) {
            FieldGrid g = io::to_grid(io::read_tensor_file(dir / name.get<std::string>()), stride);
            if (g.width() != gw || g.height() != gh || g.channels() != channels) {
                throw DataError(name.get<std::string>() + ": shape disagrees with manifest");
            }
            return g;
        };
        for (const json& name : conf) set.maps.confidence.push_back(load(name, 1));
        for (const json& name : dirn) set.maps.direction.push_back(load(name, 2));
        if (m.contains("background")) set.background = load(m["background"], 1);
    } catch (const json::exception& e) {
        throw DataError(manifest_path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(manifest_path.string() + ": " + e.what());
    }
    return set;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bounding-box constrained multi-person pose parsing", args.empty() ? "bbpose" : args.front()};
    app.require_subcommand(1);

    EncoderConfig encoder;
    const auto add_encoder_flags = [&](CLI::App* cmd) {
        cmd->add_option("--sigma", encoder.sigma, "Gaussian spread in pixels")->capture_default_str();
        cmd->add_option("--delta", encoder.delta, "Limb rectangle half-width in pixels")->capture_default_str();
        cmd->add_option("--stride", encoder.stride, "Pixels per grid cell")->capture_default_str();
    };

    // encode
    std::string encode_input;
    std::string encode_out;
    std::string encode_scales;
    CLI::App* encode = app.add_subcommand("encode", "Synthesize confidence maps and direction fields from a scene");
    encode->add_option("scene_file", encode_input)->required();
    encode->add_option("out_dir", encode_out)->required();
    add_encoder_flags(encode);
    encode->add_option("--scales", encode_scales, "Also encode rescaled copies, e.g. 0.7,1.0,1.3");

    // parse
    std::string tensor_dir;
    std::string boxes_file;
    std::string parse_out;
    ParseFlags pf;
    CLI::App* parse = app.add_subcommand("parse", "Parse poses from tensors under bounding-box constraints");
    parse->add_option("tensor_dir", tensor_dir)->required();
    parse->add_option("boxes_file", boxes_file)->required();
    parse->add_option("out_file", parse_out)->required();
    parse->add_option("--eta", pf.pipeline.parse.eta, "Pose NMS elimination threshold")->capture_default_str();
    parse->add_option("--peak-threshold", pf.pipeline.detect.peak_threshold)->capture_default_str();
    parse->add_option("--nms-window", pf.pipeline.detect.nms_window, "Peak neighborhood size in cells (odd)")
        ->capture_default_str();
    parse->add_option("--box-extension", pf.pipeline.detect.box_extension, "Total width/height growth fraction")
        ->capture_default_str();
    parse->add_option("--min-connection-score", pf.pipeline.parse.min_connection_score)->capture_default_str();
    parse->add_option("--completion-min-score", pf.pipeline.parse.completion_min_score)->capture_default_str();
    parse->add_flag("--subpixel", pf.pipeline.detect.subpixel_refine, "Quadratic sub-cell peak refinement");
    parse->add_flag("--no-nms", pf.no_nms, "Disable pose NMS");
    parse->add_flag("--no-completion", pf.no_completion, "Disable pose completion");
    parse->add_option("--scales", pf.scales, "Scales to fuse, e.g. 0.7,1.0,1.3 (default: all in manifest)");

    // eval
    std::string pred_file;
    std::string gt_file;
    std::string oks_file;
    CLI::App* eval = app.add_subcommand("eval", "OKS-based average precision of predictions");
    eval->add_option("pred_file", pred_file)->required();
    eval->add_option("gt_file", gt_file)->required();
    eval->add_option("--oks-config", oks_file, "JSON file {\"k\": [14 falloff constants]}");

    // synth
    SynthConfig synth_cfg;
    int scenes = 10;
    std::string persons = "1-5";
    std::optional<int> occlude_limb;
    double occlude_prob = 1.0;
    std::string synth_out;
    CLI::App* synth = app.add_subcommand("synth", "Generate a seeded synthetic scene + tensor corpus");
    synth->add_option("out_dir", synth_out)->required();
    synth->add_option("--seed", synth_cfg.seed)->capture_default_str();
    synth->add_option("--scenes", scenes)->capture_default_str()->check(CLI::NonNegativeNumber);
    synth->add_option("--persons", persons, "N or MIN-MAX")->capture_default_str();
    synth->add_option("--noise", synth_cfg.noise_amplitude)->capture_default_str();
    synth->add_option("--occlude-limb", occlude_limb, "Zero this limb's direction field")->check(CLI::Range(0, 12));
    synth->add_option("--occlude-prob", occlude_prob, "Per-person occlusion probability")->capture_default_str();
    synth->add_option("--min-separation", synth_cfg.min_separation)->capture_default_str();
    synth->add_option("--width", synth_cfg.image_width)->capture_default_str();
    synth->add_option("--height", synth_cfg.image_height)->capture_default_str();
    synth->add_option("--min-person-height", synth_cfg.min_person_height)->capture_default_str();
    synth->add_option("--max-person-height", synth_cfg.max_person_height)->capture_default_str();
    add_encoder_flags(synth);

    // render
    std::string render_in;
    std::string render_out;
    CLI::App* render = app.add_subcommand("render", "Draw skeleton overlays into a PPM image");
    render->add_option("input", render_in)->required();
    render->add_option("out_image", render_out)->required();

    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("bbpose");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (synth->parsed()) {
            const auto [lo, hi] = parse_person_range(persons);
            synth_cfg.min_persons = lo;
            synth_cfg.max_persons = hi;
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const Skeleton skeleton = canonical_skeleton();
    try {
        if (encode->parsed()) {
            encoder.validate();
            const SceneAnnotation scene = io::read_scene_file(encode_input);
            json manifest = write_tensor_set(encode_out, scene, encoder, encode_scene(scene, encoder, skeleton));
            if (!encode_scales.empty()) {
                json entries = json::array();
                for (double scale : parse_scale_list(encode_scales)) {
                    if (std::abs(scale - 1.0) < 1e-9) {
                        entries.push_back({{"scale", scale}, {"directory", "."}});
                        continue;
                    }
                    const std::string sub = scale_directory(scale);
                    const SceneAnnotation scaled = scaled_scene(scene, scale);
                    write_tensor_set(fs::path(encode_out) / sub, scaled, encoder,
                                     encode_scene(scaled, encoder, skeleton));
                    entries.push_back({{"scale", scale}, {"directory", sub}});
                }
                manifest["scales"] = entries;
                io::write_json_file(fs::path(encode_out) / kManifestName, manifest);
            }
            return kExitOk;
        }

        if (parse->parsed()) {
            pf.pipeline.pose_nms = !pf.no_nms;
            pf.pipeline.pose_completion = !pf.no_completion;
            pf.pipeline.detect.validate();
            pf.pipeline.parse.validate();
            const TensorSet base = read_tensor_set(tensor_dir);
            const FieldMaps maps = load_prediction(tensor_dir, pf.scales, base);
            const SceneAnnotation boxes = io::read_scene_file(boxes_file);
            const double width = base.manifest.at("image_width").get<double>();
            const double height = base.manifest.at("image_height").get<double>();
            std::vector<BoundingBox> extended;
            for (const BoundingBox& b : boxes.boxes) {
                const BoundingBox e = extend_box(b, width, height, pf.pipeline.detect.box_extension);
                if (!e.valid()) throw DataError("box lies outside the image after clipping");
                extended.push_back(e);
            }
            const auto result = parse_scene(extended, maps, skeleton, pf.pipeline);
            SceneAnnotation like = boxes;
            like.image_width = static_cast<int>(width);
            like.image_height = static_cast<int>(height);
            io::write_scene_file(parse_out, to_prediction_scene(result, like));
            return kExitOk;
        }

        if (eval->parsed()) {
            const OksConfig oks_cfg = oks_file.empty() ? OksConfig{} : read_oks_config(oks_file);
            const auto preds = io::read_scene_collection(pred_file);
            const auto gts = io::read_scene_collection(gt_file);
            if (!preds.empty()) {
                std::set<std::string> pred_ids;
                std::set<std::string> gt_ids;
                for (const auto& s : preds) pred_ids.insert(s.image_id);
                for (const auto& s : gts) gt_ids.insert(s.image_id);
                std::vector<std::string> offenders;
                std::set_symmetric_difference(pred_ids.begin(), pred_ids.end(), gt_ids.begin(), gt_ids.end(),
                                              std::back_inserter(offenders));
                if (!offenders.empty()) {
                    err << "error: image ids present in only one file:";
                    for (const auto& id : offenders) err << " '" << id << "'";
                    err << '\n';
                    return kExitData;
                }
            }
            out << report_to_json(average_precision(preds, gts, oks_cfg)).dump(2) << '\n';
            return kExitOk;
        }

        if (synth->parsed()) {
            encoder.validate();
            if (occlude_limb) synth_cfg.occlusion = OcclusionConfig{*occlude_limb, occlude_prob};
            synth_cfg.validate();
            const fs::path root(synth_out);
            fs::create_directories(root);

            std::vector<json> entries(static_cast<std::size_t>(scenes));
            parallel_for(scenes, default_thread_count(), [&](int i) {
                SynthConfig cfg = synth_cfg;
                cfg.seed = CounterRng::mix(synth_cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(i + 1));
                GeneratedScene generated = generate_scene(cfg);
                std::ostringstream name;
                name << "scene_" << std::setw(4) << std::setfill('0') << i;
                generated.scene.image_id = name.str();
                const fs::path dir = root / name.str();
                const auto perturbed =
                    perturb_fields(encode_scene(generated.scene, encoder, skeleton), generated.scene, cfg,
                                   encoder, skeleton);
                write_tensor_set(dir, generated.scene, encoder, perturbed.maps);
                io::write_scene_file(dir / "scene.json", generated.scene);
                entries[i] = json{{"directory", name.str()},
                                  {"image_id", generated.scene.image_id},
                                  {"seed", cfg.seed},
                                  {"persons", generated.scene.persons.size()},
                                  {"requested_persons", generated.requested_persons},
                                  {"occluded_persons", perturbed.occluded_persons}};
            });

            json corpus;
            corpus["format"] = "bbpose-corpus";
            corpus["version"] = 1;
            corpus["seed"] = synth_cfg.seed;
            corpus["config"] = {{"persons", {synth_cfg.min_persons, synth_cfg.max_persons}},
                                {"noise_amplitude", synth_cfg.noise_amplitude},
                                {"min_separation", synth_cfg.min_separation},
                                {"image_width", synth_cfg.image_width},
                                {"image_height", synth_cfg.image_height},
                                {"person_height", {synth_cfg.min_person_height, synth_cfg.max_person_height}},
                                {"sigma", encoder.sigma},
                                {"delta", encoder.delta},
                                {"stride", encoder.stride}};
            if (synth_cfg.occlusion) {
                corpus["config"]["occlusion"] = {{"limb_class", synth_cfg.occlusion->limb_class},
                                                 {"probability", synth_cfg.occlusion->probability}};
            }
            corpus["scenes"] = entries;
            io::write_json_file(root / "corpus.json", corpus);
            return kExitOk;
        }

        if (render->parsed()) {
            const SceneAnnotation scene = io::read_scene_file(render_in);
            if (scene.image_width <= 0 || scene.image_height <= 0) throw DataError("render: scene has no image size");
            const RasterImage image = render_scene(scene, skeleton);
            std::ofstream file(render_out, std::ios::binary | std::ios::trunc);
            if (!file) throw DataError("cannot open " + render_out + " for writing");
            write_ppm(file, image);
            if (!file) throw DataError("write failed: " + render_out);
            return kExitOk;
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace bbpose::cli
