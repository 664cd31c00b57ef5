// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, training, rendering, HDRI
// relighting, chrome-ball calibration and evaluation.

#include "relit/baselines.hpp"
#include "relit/calibration.hpp"
#include "relit/dataset.hpp"
#include "relit/error.hpp"
#include "relit/evaluate.hpp"
#include "relit/lattice.hpp"
#include "relit/model.hpp"
#include "relit/relighting.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace relit;

namespace {

void write_image(const fs::path& path, const Image& img, double exposure = 1.0) {
    if (path.extension() == ".ppm")
        write_ppm_preview(path, img, exposure);
    else
        write_pfm(path, img);
}

Vec3 unit_light(const std::vector<double>& xyz) {
    const Vec3 l{xyz.at(0), xyz.at(1), xyz.at(2)};
    if (!(length(l) > 0.0)) throw DomainError("light direction must be non-zero");
    return normalized(l);
}

CameraModel load_pose(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open pose file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
        CameraModel c;
        const auto k = j.at("K").get<std::vector<double>>();
        const auto r = j.at("R").get<std::vector<double>>();
        const auto t = j.at("t").get<std::vector<double>>();
        if (k.size() != 9 || r.size() != 9 || t.size() != 3) throw ParseError(path.string() + ": K, R need 9 entries, t 3");
        std::copy(k.begin(), k.end(), c.intrinsics.m.begin());
        std::copy(r.begin(), r.end(), c.rotation.m.begin());
        c.translation = {t[0], t[1], t[2]};
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

struct CameraChoice {
    int camera_id = -1;
    std::string pose;
    std::string data;

    CameraModel resolve() const {
        if (!pose.empty()) return load_pose(pose);
        if (data.empty()) throw DomainError("--camera-id needs --data DIR to look the camera up");
        const OLATDataset ds = load_dataset(data);
        if (camera_id < 0 || camera_id >= ds.camera_count())
            throw DomainError("camera id " + std::to_string(camera_id) + " not in dataset (" +
                              std::to_string(ds.camera_count()) + " cameras)");
        return ds.cameras[static_cast<std::size_t>(camera_id)];
    }
};

// --- gen-data ---------------------------------------------------------------

struct GenArgs {
    std::string scene = "reference";
    int views = 3;
    double view_spacing = 10.0;
    std::optional<int> lights;
    std::optional<double> light_spacing;
    bool full_sphere = false;
    std::vector<int> res{64, 64};
    std::uint64_t seed = 42;
    std::string out;
    double radius = 3.0;
    double fov = 40.0;
    int held_out_views = 1;
    int held_out_lights = 2;
};

int run_gen(const GenArgs& a) {
    const Scene scene = make_scene(a.scene);
    const double focal = 0.5 * a.res[0] / std::tan(degrees_to_radians(0.5 * a.fov));
    const auto cams = camera_grid(a.views, a.view_spacing, a.radius, {0.0, 0.0, 0.0}, a.res[0], a.res[1], focal);
    LightRig rig;
    if (a.lights)
        rig = light_lattice(static_cast<std::size_t>(*a.lights), !a.full_sphere);
    else
        rig = light_sphere_grid(a.light_spacing.value_or(25.0), !a.full_sphere);
    GenerateOptions opts;
    opts.held_out_views = a.held_out_views;
    opts.held_out_lights = a.held_out_lights;
    const OLATDataset ds = generate_dataset(scene, cams, rig, a.seed, opts);
    save_dataset(ds, a.out);
    save_split(ds.split, fs::path(a.out) / "split.json");
    std::printf("wrote %d cameras x %d lights (%dx%d) to %s\n", ds.camera_count(), ds.light_count(), ds.width,
                ds.height, a.out.c_str());
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string variant = "full";
    int epochs = 30;
    int batch = 8192;
    double lr = 3e-4;
    double lr_decay = 0.995;
    std::uint64_t seed = 42;
    std::string out;
    std::string normal_decode = "raw";
    bool lm_cosine = false;
    std::string history;
    int checkpoint_every = 0;
    bool withhold_views = false;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const OLATDataset ds = load_dataset(a.data);
    ModelConfig mc;
    mc.variant = parse_variant(a.variant);
    mc.normal_decode = parse_normal_decode(a.normal_decode);
    mc.lm_cosine = a.lm_cosine;
    Model model = make_model<float>(mc, ds.planes, a.seed);
    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.lr_decay = a.lr_decay;
    tc.seed = a.seed;
    tc.checkpoint_every = a.checkpoint_every;
    tc.checkpoint_path = a.out;
    tc.withhold_views = a.withhold_views;
    if (!a.quiet)
        tc.on_epoch = [](const EpochRecord& r) {
            std::printf("epoch %3d  L %.6f  L_p %.6f  L_m %.6f  L_n %.6f  lr %.3g  %.1fs\n", r.epoch, r.loss.total,
                        r.loss.photometric, r.loss.microfacet, r.loss.normal, r.learning_rate, r.seconds);
            std::fflush(stdout);
        };
    const auto history = train(model, ds, tc);
    const nlohmann::json extra = {{"dataset_scene_hash", ds.scene_hash}, {"seed", a.seed}, {"epochs", a.epochs},
                                  {"batch", a.batch}, {"lr", a.lr}, {"lr_decay", a.lr_decay},
                                  {"withhold_views", a.withhold_views}};
    save_model(a.out, model, true, extra.dump());
    const fs::path hist = a.history.empty() ? fs::path(a.out + ".loss.csv") : fs::path(a.history);
    write_loss_history(hist, history);
    std::printf("saved %s (loss history %s)\n", a.out.c_str(), hist.c_str());
    return 0;
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
    std::string ckpt;
    CameraChoice camera;
    std::vector<double> light;
    std::string out;
    std::string dump_svbrdf;
    double exposure = 1.0;
};

int run_render(const RenderArgs& a) {
    const Model model = load_model(a.ckpt);
    const CameraModel cam = a.camera.resolve();
    const RenderedView rv = render_view(model, cam, model.planes, unit_light(a.light));
    write_image(a.out, rv.color, a.exposure);
    if (!a.dump_svbrdf.empty()) {
        if (!model.has_svbrdf()) throw DomainError("--dump-svbrdf: the vanilla variant has no SVBRDF maps");
        fs::create_directories(a.dump_svbrdf);
        write_pfm(fs::path(a.dump_svbrdf) / "normal.pfm", rv.normal);
        write_pfm(fs::path(a.dump_svbrdf) / "albedo.pfm", rv.albedo);
        write_pfm(fs::path(a.dump_svbrdf) / "roughness.pfm", rv.roughness);
        Image mask(rv.color.width, rv.color.height, 1);
        for (std::size_t i = 0; i < rv.mask.size(); ++i) mask.pixels[i] = rv.mask[i];
        write_pfm(fs::path(a.dump_svbrdf) / "mask.pfm", mask);
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

// --- relight-hdri -----------------------------------------------------------

struct RelightArgs {
    std::string ckpt;
    std::string env;
    int sweep_n = 3096;
    CameraChoice camera;
    std::string out;
    double orientation = 0.0;
    std::string sweep_cache;
    std::string weights_out;
    std::string preview;
    double exposure = 1.0;
};

int run_relight(const RelightArgs& a) {
    if (a.sweep_n < 1) throw DomainError("--sweep-n must be positive");
    const Model model = load_model(a.ckpt);
    const CameraModel cam = a.camera.resolve();
    const EnvironmentMap env = load_environment(a.env, a.orientation);
    const std::vector<Vec3> all = fibonacci_sphere(static_cast<std::size_t>(a.sweep_n));
    std::vector<Rgb> weights = envmap_weights(env, all);
    if (!a.weights_out.empty()) write_weight_table(a.weights_out, all, weights);
    const std::size_t zeroed = zero_back_hemisphere(weights, all);
    if (zeroed > 0)
        std::fprintf(stderr, "warning: %zu of %zu directions lie behind the trained light hemisphere; their weights are zeroed\n",
                     zeroed, all.size());
    std::vector<Vec3> dirs;
    std::vector<Rgb> front_weights;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i].z >= 0.0) {
            dirs.push_back(all[i]);
            front_weights.push_back(weights[i]);
        }
    const OLATSweep sweep = olat_sweep(model, cam, model.planes, dirs);
    if (!a.sweep_cache.empty()) save_sweep(sweep, a.sweep_cache);
    const Image img = relight_hdri(sweep, front_weights);
    write_image(a.out, img, a.exposure);
    if (!a.preview.empty()) write_ppm_preview(a.preview, img, a.exposure);
    std::printf("wrote %s from %zu OLAT renders\n", a.out.c_str(), dirs.size());
    return 0;
}

// --- calib-light ------------------------------------------------------------

struct CalibArgs {
    std::string image;
    std::vector<double> ball;
    CameraChoice camera;
};

int run_calib(const CalibArgs& a) {
    const CameraModel cam = a.camera.resolve();
    const Image img = read_pfm(a.image);
    const LightCalibration c = chrome_ball_light_dir(img, {a.ball.at(0), a.ball.at(1), a.ball.at(2)}, cam);
    const nlohmann::json out = {{"direction", {c.direction.x, c.direction.y, c.direction.z}},
                                {"spot", {c.spot_x, c.spot_y}},
                                {"low_confidence", c.low_confidence}};
    std::cout << out.dump() << '\n';
    if (c.low_confidence) std::fprintf(stderr, "warning: highlight near the ball rim; direction is low confidence\n");
    return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt;
    std::string baseline;
    std::string data;
    std::string split;
    std::string report;
};

int run_eval(const EvalArgs& a) {
    const OLATDataset ds = load_dataset(a.data);
    const SplitSpec split = a.split.empty() ? ds.split : load_split(a.split);
    MetricReport r;
    if (!a.ckpt.empty()) {
        const Model model = load_model(a.ckpt);
        r = evaluate_model(model, ds, split);
        r.checkpoint_hash = file_hash(a.ckpt);
    } else {
        r = evaluate_baseline(a.baseline, ds, split);
    }
    if (!a.report.empty()) write_report(a.report, r);
    std::printf("%s: mean PSNR %.3f dB, mean SSIM %.4f over %zu pairs\n", r.method.c_str(), r.mean_psnr, r.mean_ssim,
                r.rows.size());
    std::printf("throughput: %.6g rays/s (%.4g s per frame)\n", r.rays_per_second, r.seconds_per_frame);
    return 0;
}

// --- convert-env ------------------------------------------------------------

int run_convert(const std::string& in, const std::string& out) {
    const Image img = read_rgbe(in);
    write_pfm(out, img);
    std::printf("wrote %s (%dx%d)\n", out.c_str(), img.width, img.height);
    return 0;
}

void add_camera_options(CLI::App* sub, CameraChoice& c, bool allow_pose) {
    auto* id = sub->add_option("--camera-id", c.camera_id, "Camera id in the dataset");
    sub->add_option("--data", c.data, "Dataset directory holding the camera");
    if (allow_pose) {
        auto* pose = sub->add_option("--pose", c.pose, "JSON camera pose {K, R, t, width, height}");
        id->excludes(pose);
        auto* group = sub->add_option_group("camera");
        group->add_option(id);
        group->add_option(pose);
        group->require_option(1);
    } else {
        id->required();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relightable neural light field toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen-data", "Render a synthetic OLAT dataset");
    g->add_option("--scene", gen.scene, "Scene name (reference, chrome_ball)")->capture_default_str();
    g->add_option("--views", gen.views, "Cameras per grid axis")->capture_default_str();
    g->add_option("--view-spacing", gen.view_spacing, "Camera spacing in degrees")->capture_default_str();
    auto* lights_opt = g->add_option("--lights", gen.lights, "Number of lights (Fibonacci lattice)");
    g->add_option("--light-spacing", gen.light_spacing, "Light spacing in degrees, used when --lights is absent")
        ->excludes(lights_opt);
    g->add_flag("--full-sphere", gen.full_sphere, "Place lights on the full sphere instead of the z >= 0 hemisphere");
    g->add_option("--res", gen.res, "Resolution W H")->expected(2)->capture_default_str();
    g->add_option("--seed", gen.seed, "Seed for the split")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--camera-radius", gen.radius, "Camera distance from the target")->capture_default_str();
    g->add_option("--fov", gen.fov, "Horizontal field of view in degrees")->capture_default_str();
    g->add_option("--held-out-views", gen.held_out_views, "Views held out for testing")->capture_default_str();
    g->add_option("--held-out-lights", gen.held_out_lights, "Lights held out for testing")->capture_default_str();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model on a dataset");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--variant", tr.variant, "full, no_roughness or vanilla")->capture_default_str();
    t->add_option("--epochs", tr.epochs, "Epoch budget")->capture_default_str();
    t->add_option("--batch", tr.batch, "Rays per batch")->capture_default_str();
    t->add_option("--lr", tr.lr, "Initial learning rate")->capture_default_str();
    t->add_option("--lr-decay", tr.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
    t->add_option("--seed", tr.seed, "Initialization and shuffle seed")->capture_default_str();
    t->add_option("--out", tr.out, "Checkpoint path")->required();
    t->add_option("--normal-decode", tr.normal_decode, "raw or encoded (N = 2n - 1)")->capture_default_str();
    t->add_flag("--lm-cosine", tr.lm_cosine, "Include N.l in the microfacet loss target");
    t->add_option("--history", tr.history, "Loss history path (default CKPT.loss.csv)");
    t->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint cadence in epochs (0: end only)");
    t->add_flag("--withhold-views", tr.withhold_views, "Also drop held-out views under training lights (novel-view setting)");
    t->add_flag("--quiet", tr.quiet, "Suppress per-epoch output");

    RenderArgs rn;
    auto* r = app.add_subcommand("render", "Render a view under one directional light");
    r->add_option("--ckpt", rn.ckpt, "Checkpoint")->required();
    add_camera_options(r, rn.camera, true);
    r->add_option("--light", rn.light, "Light direction X Y Z (surface to light)")->expected(3)->required();
    r->add_option("--out", rn.out, "Output image (.pfm, or .ppm preview)")->required();
    r->add_option("--dump-svbrdf", rn.dump_svbrdf, "Directory for normal/albedo/roughness maps");
    r->add_option("--exposure", rn.exposure, "Exposure for .ppm output")->capture_default_str();

    RelightArgs rl;
    auto* h = app.add_subcommand("relight-hdri", "Relight a view with an environment map");
    h->add_option("--ckpt", rl.ckpt, "Checkpoint")->required();
    h->add_option("--env", rl.env, "Equirectangular PFM environment map")->required();
    h->add_option("--sweep-n", rl.sweep_n, "Number of OLAT directions on the sphere")->capture_default_str();
    add_camera_options(h, rl.camera, true);
    h->add_option("--out", rl.out, "Output image")->required();
    h->add_option("--orientation", rl.orientation, "Environment rotation about +y, radians");
    h->add_option("--sweep-cache", rl.sweep_cache, "Directory to store the OLAT stack");
    h->add_option("--weights-out", rl.weights_out, "Write the per-direction weight table");
    h->add_option("--preview", rl.preview, "Tone-mapped 8-bit PPM copy");
    h->add_option("--exposure", rl.exposure, "Exposure for previews")->capture_default_str();

    CalibArgs cb;
    auto* c = app.add_subcommand("calib-light", "Recover a light direction from a chrome-ball image");
    c->add_option("--image", cb.image, "PFM image of the ball")->required();
    c->add_option("--ball", cb.ball, "Ball centre and radius in pixels: CX CY R")->expected(3)->required();
    add_camera_options(c, cb.camera, true);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score a model or baseline on held-out pairs");
    auto* ckpt = e->add_option("--ckpt", ev.ckpt, "Checkpoint");
    auto* base = e->add_option("--baseline", ev.baseline, "nearest or barycentric");
    ckpt->excludes(base);
    auto* method = e->add_option_group("method");
    method->add_option(ckpt);
    method->add_option(base);
    method->require_option(1);
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--split", ev.split, "Split file (default: the dataset's split)");
    e->add_option("--report", ev.report, "Report output path");

    std::string conv_in, conv_out;
    auto* cv = app.add_subcommand("convert-env", "Convert a Radiance RGBE map to PFM");
    cv->add_option("--in", conv_in, "Input .hdr")->required();
    cv->add_option("--out", conv_out, "Output .pfm")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*g) return run_gen(gen);
        if (*t) return run_train(tr);
        if (*r) return run_render(rn);
        if (*h) return run_relight(rl);
        if (*c) return run_calib(cb);
        if (*e) return run_eval(ev);
        if (*cv) return run_convert(conv_in, conv_out);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
