// Command-line front end: mesh -> point cloud extraction, synthetic data
// generation, training, evaluation, prediction, the ablation table, and
// attention-map export.

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "drag/contour.hpp"
#include "drag/csv_io.hpp"
#include "drag/data.hpp"
#include "drag/error.hpp"
#include "drag/model.hpp"
#include "drag/stl_io.hpp"
#include "drag/synthetic.hpp"
#include "drag/train.hpp"

namespace {

using drag::DatConfig;
using drag::DragNet;
using drag::ExtractionConfig;
using drag::PointCloud;
using drag::TrainConfig;
using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) drag::fail("IoError", "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DatConfig load_model_config(const std::string& path) {
    return path.empty() ? DatConfig{} : DatConfig::from_json(read_text_file(path));
}

TrainConfig load_train_config(const std::string& path) {
    return path.empty() ? TrainConfig{} : TrainConfig::from_json(read_text_file(path));
}

// Shared by predict and attention-export: STL goes through sectional
// extraction with the model's stored settings, CSV clouds are taken as-is
// (normalized on load); both are FPS-matched to the model's point count.
PointCloud load_model_input(DragNet& model, const std::string& input, double* parse_s,
                            double* extract_s) {
    auto t0 = std::chrono::steady_clock::now();
    PointCloud cloud;
    const bool is_stl = input.size() > 4 && input.substr(input.size() - 4) == ".stl";
    if (is_stl) {
        drag::TriangleMesh mesh = drag::read_stl_file(input);
        if (parse_s) *parse_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        cloud = drag::extract_point_cloud(mesh, model.extraction);
    } else {
        auto csv = drag::read_cloud_csv(input);
        cloud = drag::normalize_cloud(csv.points, PointCloud::Source::sectional);
        if (parse_s) *parse_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
    }
    if (cloud.size() > static_cast<std::size_t>(model.config().points))
        cloud = drag::fps_downsample(cloud, static_cast<std::size_t>(model.config().points));
    if (extract_s) *extract_s = seconds_since(t0);
    return cloud;
}

int run(int argc, char** argv) {
    CLI::App app{"aerodrag: drag-coefficient prediction from surface meshes"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 1;
    bool verbose = false;
    app.add_option("--seed", seed, "global random seed")->capture_default_str();
    app.add_option("--threads", threads, "worker thread cap (1 = fully deterministic)")
        ->capture_default_str();
    app.add_flag("--verbose", verbose, "chatty progress output");

    // ---- extract ----
    auto* extract = app.add_subcommand("extract", "sectional point cloud from an STL mesh");
    std::string ex_input, ex_out;
    ExtractionConfig ex_cfg;
    std::string ex_alpha = "auto";
    std::string ex_axis = "x";
    extract->add_option("--input", ex_input, "input STL file")->required();
    extract->add_option("--out", ex_out, "output cloud CSV")->required();
    extract->add_option("--slices", ex_cfg.slice_count, "slicing stations")
        ->capture_default_str();
    extract->add_option("--per-section", ex_cfg.points_per_section, "samples per section")
        ->capture_default_str();
    extract->add_option("--target", ex_cfg.target_cloud_size, "final cloud size")
        ->capture_default_str();
    extract->add_option("--alpha", ex_alpha, "alpha radius in meters, or 'auto'")
        ->capture_default_str();
    extract->add_option("--axis", ex_axis, "slicing axis: x, y or z")->capture_default_str();
    extract->add_option("--densify", ex_cfg.densify_factor, "high-curvature density factor")
        ->capture_default_str();
    extract
        ->add_option("--curvature-threshold", ex_cfg.curvature_radius_threshold,
                     "osculating-radius threshold as a fraction of the bbox diagonal")
        ->capture_default_str();
    double ex_unit_scale = 1.0;
    extract->add_option("--unit-scale", ex_unit_scale, "multiply mesh coordinates (unit fix)")
        ->capture_default_str();

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "synthetic labeled dataset");
    int gd_n = 1000;
    std::string gd_out;
    gen->add_option("--n", gd_n, "sample count (>= 10)")->capture_default_str();
    gen->add_option("--out", gd_out, "output dataset directory")->required();

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model on a dataset directory");
    std::string tr_data, tr_config, tr_train_config, tr_out, tr_history;
    train->add_option("--data", tr_data, "dataset directory (labels.csv + cloud_*.csv)")
        ->required();
    train->add_option("--config", tr_config, "model config JSON (defaults when omitted)");
    train->add_option("--train-config", tr_train_config, "train config JSON");
    train->add_option("--out", tr_out, "output model file")->required();
    train->add_option("--history", tr_history, "write per-epoch history CSV here");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a model on a dataset directory");
    std::string ev_model, ev_data;
    bool ev_json = false;
    eval->add_option("--model", ev_model, "model file")->required();
    eval->add_option("--data", ev_data, "dataset directory")->required();
    eval->add_flag("--json", ev_json, "emit metrics as JSON");

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "predict Cd for an STL mesh or cloud CSV");
    std::string pr_model, pr_input;
    bool pr_json = false;
    predict->add_option("--model", pr_model, "model file")->required();
    predict->add_option("--input", pr_input, "input .stl or cloud .csv")->required();
    predict->add_flag("--json", pr_json, "emit JSON instead of plain text");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "train and score the five ablation variants");
    std::string ab_data, ab_config, ab_train_config, ab_out;
    int ab_seeds = 3;
    ablate->add_option("--data", ab_data, "dataset directory")->required();
    ablate->add_option("--config", ab_config, "base model config JSON");
    ablate->add_option("--train-config", ab_train_config, "train config JSON");
    ablate->add_option("--seeds", ab_seeds, "seeds per variant")->capture_default_str();
    ablate->add_option("--out", ab_out, "output table CSV")->required();

    // ---- attention-export ----
    auto* attn = app.add_subcommand("attention-export", "per-point attention salience CSV");
    std::string at_model, at_input, at_out;
    attn->add_option("--model", at_model, "model file")->required();
    attn->add_option("--input", at_input, "input .stl or cloud .csv")->required();
    attn->add_option("--out", at_out, "output x,y,z,salience CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage error
    }

    if (extract->parsed()) {
        ex_cfg.alpha = ex_alpha == "auto" ? 0.0 : std::stod(ex_alpha);
        if (ex_axis == "x")
            ex_cfg.axis = {1, 0, 0};
        else if (ex_axis == "y")
            ex_cfg.axis = {0, 1, 0};
        else if (ex_axis == "z")
            ex_cfg.axis = {0, 0, 1};
        else
            drag::fail("InvalidParams", "--axis must be x, y or z");

        drag::TriangleMesh mesh = drag::read_stl_file(ex_input);
        if (ex_unit_scale != 1.0)
            for (auto& v : mesh.vertices) v = v * ex_unit_scale;
        PointCloud cloud = drag::extract_point_cloud(mesh, ex_cfg);
        drag::write_cloud_csv(ex_out, cloud.raw_points());
        if (verbose)
            std::cout << "extracted " << cloud.size() << " points to " << ex_out << "\n";
        return 0;
    }

    if (gen->parsed()) {
        auto samples = drag::make_dataset(gd_n, seed, ExtractionConfig{}, threads);
        drag::save_dataset(gd_out, samples);
        if (verbose) std::cout << "wrote " << samples.size() << " samples to " << gd_out << "\n";
        return 0;
    }

    if (train->parsed()) {
        DatConfig cfg = load_model_config(tr_config);
        TrainConfig tcfg = load_train_config(tr_train_config);
        if (seed != 0) tcfg.seed = seed;

        auto dataset = drag::load_dataset(tr_data);
        dataset = drag::downsample_dataset(dataset, static_cast<std::size_t>(cfg.points));
        DragNet model(cfg, tcfg.seed);
        auto result = drag::train_model(model, dataset, tcfg);
        model.save(tr_out);

        if (!tr_history.empty()) {
            std::ofstream h(tr_history);
            h << "epoch,train_mse,val_mse,lr\n";
            char buf[128];
            for (const auto& e : result.history) {
                std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_mse,
                              e.val_mse, e.lr);
                h << buf;
            }
        }
        std::cout << "best epoch " << result.best_epoch << ", test metrics:\n"
                  << result.test_metrics.to_json() << "\n";
        return 0;
    }

    if (eval->parsed()) {
        auto model = DragNet::load(ev_model);
        auto dataset = drag::load_dataset(ev_data);
        dataset = drag::downsample_dataset(dataset, static_cast<std::size_t>(model->config().points));
        auto metrics = drag::evaluate_model(*model, dataset);
        if (ev_json)
            std::cout << metrics.to_json() << "\n";
        else
            std::cout << "mse=" << metrics.mse << " mae=" << metrics.mae
                      << " max_ae=" << metrics.max_ae
                      << " r2=" << (metrics.r2_defined ? std::to_string(metrics.r2) : "undefined")
                      << "\n";
        return 0;
    }

    if (predict->parsed()) {
        auto model = DragNet::load(pr_model);
        double parse_s = 0, extract_s = 0;
        PointCloud cloud = load_model_input(*model, pr_input, &parse_s, &extract_s);
        auto t0 = std::chrono::steady_clock::now();
        double cd = model->predict(cloud);
        double infer_s = seconds_since(t0);

        if (pr_json) {
            json out{{"cd", cd},
                     {"timings",
                      {{"parse_s", parse_s}, {"extract_s", extract_s}, {"inference_s", infer_s}}}};
            std::cout << out.dump(2) << "\n";
        } else {
            std::cout << "cd=" << cd << "\n"
                      << "timings: parse " << parse_s << " s, extract " << extract_s
                      << " s, inference " << infer_s << " s\n";
        }
        return 0;
    }

    if (ablate->parsed()) {
        DatConfig cfg = load_model_config(ab_config);
        TrainConfig tcfg = load_train_config(ab_train_config);
        if (seed != 0) tcfg.seed = seed;
        auto dataset = drag::load_dataset(ab_data);
        dataset = drag::downsample_dataset(dataset, static_cast<std::size_t>(cfg.points));
        auto rows = drag::ablation_suite(dataset, cfg, tcfg, ab_seeds);
        std::ofstream out(ab_out);
        if (!out) drag::fail("IoError", "cannot open '" + ab_out + "'");
        out << drag::ablation_csv(rows);
        for (const auto& label : drag::kAblationLabels)
            std::cout << label << " median r2: " << drag::ablation_median_r2(rows, label) << "\n";
        return 0;
    }

    if (attn->parsed()) {
        auto model = DragNet::load(at_model);
        PointCloud cloud = load_model_input(*model, at_input, nullptr, nullptr);
        auto salience = model->attention_salience(cloud);
        drag::write_cloud_csv(at_out, cloud.raw_points(), &salience, "salience");
        if (verbose) std::cout << "wrote " << salience.size() << " rows to " << at_out << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const drag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
