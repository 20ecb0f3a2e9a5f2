// mlprop: rasterize phantoms, apply directional antiderivatives and
// weighted line-integral convolutions, estimate wavefront sets, and check
// the predicted singularity propagation.
//
// Exit codes: 0 success, 1 check failed, 2 usage error, 3 invalid
// input/configuration, 4 numerical failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlprop/antiderivative.hpp"
#include "mlprop/curve.hpp"
#include "mlprop/errors.hpp"
#include "mlprop/grid.hpp"
#include "mlprop/io.hpp"
#include "mlprop/phantom.hpp"
#include "mlprop/pipeline.hpp"
#include "mlprop/propagation.hpp"
#include "mlprop/wavefront.hpp"

namespace {

using namespace mlprop;

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("malformed json in " + path + ": " + e.what());
    }
}

Direction parse_direction(const std::vector<double>& v) {
    if (v.size() != 2) throw validation_error("direction needs exactly 2 components");
    return Direction::normalized(v);
}

GridSpec grid_from_flags(const std::vector<double>& extent,
                         const std::vector<index_t>& resolution) {
    if (extent.size() != 4)
        throw validation_error("--extent needs 4 numbers: xlo xhi ylo yhi");
    if (resolution.size() != 2) throw validation_error("--resolution needs 2 numbers");
    return make_grid({{extent[0], extent[1]}, {extent[2], extent[3]}}, resolution);
}

struct EstimatorFlags {
    EstimatorParams params;

    void attach(CLI::App* cmd) {
        cmd->add_option("--window-radius-cells", params.window_radius_cells,
                        "localization window radius in cells");
        cmd->add_option("--cone-half-width", params.cone_half_width,
                        "frequency cone half-width (slope)");
        cmd->add_option("--dirs", params.dirs, "number of probe directions");
        cmd->add_option("--threshold-order", params.threshold_order,
                        "decay order below which a sample is flagged singular");
        cmd->add_option("--stride-cells", params.stride_cells,
                        "position lattice stride in cells");
        cmd->add_option("--r-min-cells", params.r_min_cells,
                        "innermost annulus radius in frequency-lattice steps");
    }
};

int run_phantom(const std::string& spec_path, const std::vector<double>& extent,
                const std::vector<index_t>& resolution, const std::string& out_path,
                const std::string& wf_out, const EstimatorFlags& est) {
    const auto [phantom, moll] = parse_phantom_json(load_json(spec_path));
    const GridSpec grid = grid_from_flags(extent, resolution);
    const SampledField field = rasterize(phantom, grid, moll);
    write_field(field, out_path);
    if (!wf_out.empty()) {
        WindowSpec window;
        window.radius = est.params.window_radius_cells *
                        std::max(grid.spacing[0], grid.spacing[1]);
        const GridSpec positions =
            make_position_lattice(grid, window, est.params.stride_cells);
        const WavefrontSet wf = exact_wavefront(phantom, est.params.dirs, positions);
        write_wavefront_csv(wf, wf_out);
    }
    return 0;
}

int run_antideriv(const std::string& in_path, const std::vector<double>& v_flag,
                  const std::string& method, const std::string& shear,
                  const std::string& out_path) {
    const SampledField input = read_field(in_path);
    const Direction v = parse_direction(v_flag);
    SampledField output;
    if (shear != "zero") {
        output = antiderivative_general(input, v, parse_shear(shear));
    } else if (method == "spectral") {
        output = spectral_antiderivative(input, v);
    } else if (method == "cumulative") {
        output = cumulative_antiderivative(input, v, input.grid);
    } else {
        throw validation_error("--method must be cumulative|spectral");
    }
    write_field(output, out_path);
    return 0;
}

int run_convolve(const std::string& in_path, const std::string& curve_path,
                 const std::string& weight_spec, const std::string& method,
                 double horizon, double t_probe_max, index_t y_resolution,
                 const std::string& out_path) {
    const SampledField input = read_field(in_path);
    const CurveSpec curve = CurveSpec::from_json(load_json(curve_path));
    const nlohmann::json wj = weight_spec.empty()
                                  ? nlohmann::json{{"kind", "unit"}}
                                  : nlohmann::json::parse(weight_spec);
    const WeightSpec weight = WeightSpec::from_json(wj, curve);
    SupportHorizon h;
    if (horizon > 0.0) {
        h.T = horizon;
        curve.validate(horizon);
    } else {
        h = validate_support_bounded(curve, input, input.grid, t_probe_max);
    }
    SampledField output;
    if (method == "pullback") {
        output = convolve_pullback(input, curve, weight, h, y_resolution);
    } else if (method == "quadrature") {
        output = convolve_quadrature(input, curve, weight, h, input.grid);
    } else {
        throw validation_error("--method must be quadrature|pullback");
    }
    write_field(output, out_path);
    return 0;
}

int run_xray(const std::string& in_path, const std::vector<double>& v_flag,
             const std::string& out_path) {
    const SampledField input = read_field(in_path);
    write_field(xray_transform(input, parse_direction(v_flag)), out_path);
    return 0;
}

int run_wf_estimate(const std::string& in_path, const std::string& out_path,
                    const EstimatorFlags& est) {
    const SampledField field = read_field(in_path);
    WindowSpec window;
    window.radius = est.params.window_radius_cells *
                    std::max(field.grid.spacing[0], field.grid.spacing[1]);
    const GridSpec positions =
        make_position_lattice(field.grid, window, est.params.stride_cells);
    const WavefrontSet wf = estimate_wavefront(
        field, positions, discretize_directions(est.params.dirs), window,
        est.params.cone_half_width, est.params.threshold_order, est.params.r_min_cells);
    write_wavefront_csv(wf, out_path);
    return 0;
}

int run_wf_predict(const std::string& wf_path, const std::vector<double>& v_flag,
                   const std::string& curve_path, double horizon, double step,
                   index_t dirs, const std::string& out_path) {
    const WavefrontSet wf = read_wavefront_csv(wf_path);
    const double orth_tol = std::sin(M_PI / static_cast<double>(dirs));
    PredictedSet predicted;
    if (!curve_path.empty()) {
        const CurveSpec curve = CurveSpec::from_json(load_json(curve_path));
        const double t_step = step > 0.0 ? step : horizon / 4096.0;
        predicted = predict_curve(wf, curve, horizon, t_step, orth_tol);
    } else if (!v_flag.empty()) {
        predicted = predict_ray(wf, parse_direction(v_flag), horizon, orth_tol, step);
    } else {
        throw validation_error("wf-predict needs --v or --curve");
    }
    std::ofstream out(out_path);
    if (!out) throw io_error("cannot open for writing: " + out_path);
    out << to_json(predicted).dump(2) << "\n";
    return 0;
}

int run_wf_check(const std::string& wf_path, const std::string& predicted_path,
                 double tol_space, double tol_angle, const std::string& report_path) {
    const WavefrontSet wf = read_wavefront_csv(wf_path);
    const PredictedSet predicted = predicted_set_from_json(load_json(predicted_path));
    const ContainmentReport report = check_containment(wf, predicted, tol_space, tol_angle);
    const nlohmann::ordered_json j = to_json(report);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw io_error("cannot open for writing: " + report_path);
        out << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
    return report.all_contained() ? 0 : 1;
}

int run_run(const std::string& config_path, const std::string& output_dir) {
    ExperimentConfig cfg = ExperimentConfig::from_json(load_json(config_path));
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const PipelineResult result = run_pipeline(cfg);
    std::cout << "input singular flags:  " << result.input_flags << "\n"
              << "output singular flags: " << result.output_flags << "\n"
              << "containment: " << (result.contained ? "ok" : "VIOLATED") << " ("
              << result.containment.contained << "/" << result.containment.checked
              << " contained)\n";
    return result.contained ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for singularity propagation of directional "
                 "antiderivatives and line-integral convolutions"};
    app.require_subcommand(1);

    // phantom
    std::string spec_path, out_path, wf_out;
    std::vector<double> extent;
    std::vector<index_t> resolution;
    EstimatorFlags phantom_est;
    auto* c_phantom = app.add_subcommand("phantom", "rasterize a phantom to a field file");
    c_phantom->add_option("--spec", spec_path, "phantom json file")->required();
    c_phantom->add_option("--extent", extent, "xlo xhi ylo yhi")->expected(4)->required();
    c_phantom->add_option("--resolution", resolution, "nx ny")->expected(2)->required();
    c_phantom->add_option("--out", out_path, "output field file")->required();
    c_phantom->add_option("--wf-out", wf_out, "also write the exact wavefront csv");
    phantom_est.attach(c_phantom);

    // antideriv
    std::string in_path, method = "cumulative", shear = "zero";
    std::vector<double> v_flag;
    auto* c_anti = app.add_subcommand("antideriv", "directional antiderivative");
    c_anti->add_option("--in", in_path, "input field file")->required();
    c_anti->add_option("--v", v_flag, "direction components")->expected(2)->required();
    c_anti->add_option("--method", method, "cumulative|spectral");
    c_anti->add_option("--shear", shear,
                       "sheared support bound: zero|constant:c|sine:a,k");
    c_anti->add_option("--out", out_path, "output field file")->required();

    // convolve
    std::string curve_path, weight_spec;
    double horizon = 0.0, t_probe_max = 20.0;
    index_t y_resolution = 256;
    auto* c_conv = app.add_subcommand("convolve",
                                      "convolution with a weighted line distribution");
    c_conv->add_option("--in", in_path, "input field file")->required();
    c_conv->add_option("--curve", curve_path, "curve json file")->required();
    c_conv->add_option("--weight", weight_spec, "inline weight json (default unit)");
    c_conv->add_option("--method", method, "quadrature|pullback")->default_val("quadrature");
    c_conv->add_option("--horizon", horizon, "explicit parameter truncation bound");
    c_conv->add_option("--t-probe-max", t_probe_max, "scan bound for the automatic horizon");
    c_conv->add_option("--y-resolution", y_resolution, "pullback parameter resolution");
    c_conv->add_option("--out", out_path, "output field file")->required();

    // xray
    auto* c_xray = app.add_subcommand("xray", "single-direction line-integral profile");
    c_xray->add_option("--in", in_path, "input field file")->required();
    c_xray->add_option("--v", v_flag, "direction components")->expected(2)->required();
    c_xray->add_option("--out", out_path, "output 1-D field file")->required();

    // wf-estimate
    EstimatorFlags est;
    auto* c_est = app.add_subcommand("wf-estimate", "estimate the wavefront set");
    c_est->add_option("--in", in_path, "input field file")->required();
    c_est->add_option("--out", out_path, "output wavefront csv")->required();
    est.attach(c_est);

    // wf-predict
    double step = 0.0;
    index_t dirs = 72;
    auto* c_pred = app.add_subcommand("wf-predict", "predicted post-operator superset");
    c_pred->add_option("--wf", spec_path, "input wavefront csv")->required();
    c_pred->add_option("--v", v_flag, "ray direction")->expected(2);
    c_pred->add_option("--curve", curve_path, "curve json file");
    c_pred->add_option("--horizon", horizon, "propagation parameter bound")->required();
    c_pred->add_option("--step", step, "parameter discretization step");
    c_pred->add_option("--dirs", dirs, "direction count behind the orthogonality tolerance");
    c_pred->add_option("--out", out_path, "output prediction json")->required();

    // wf-check
    std::string predicted_path, report_path;
    double tol_space = 0.0, tol_angle = 0.0;
    auto* c_check = app.add_subcommand("wf-check", "containment check against a prediction");
    c_check->add_option("--wf", spec_path, "estimated wavefront csv")->required();
    c_check->add_option("--predicted", predicted_path, "prediction json")->required();
    c_check->add_option("--tol-space", tol_space, "position tolerance")->required();
    c_check->add_option("--tol-angle", tol_angle, "direction tolerance (radians)")
        ->required();
    c_check->add_option("--report", report_path, "also write the report json here");

    // run
    std::string config_path, output_dir;
    auto* c_run = app.add_subcommand("run", "full experiment pipeline from a config");
    c_run->add_option("--config", config_path, "experiment config json")->required();
    c_run->add_option("--output-dir", output_dir, "override the configured output dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*c_phantom)
            return run_phantom(spec_path, extent, resolution, out_path, wf_out, phantom_est);
        if (*c_anti) return run_antideriv(in_path, v_flag, method, shear, out_path);
        if (*c_conv)
            return run_convolve(in_path, curve_path, weight_spec, method, horizon,
                                t_probe_max, y_resolution, out_path);
        if (*c_xray) return run_xray(in_path, v_flag, out_path);
        if (*c_est) return run_wf_estimate(in_path, out_path, est);
        if (*c_pred)
            return run_wf_predict(spec_path, v_flag, curve_path, horizon, step, dirs,
                                  out_path);
        if (*c_check)
            return run_wf_check(spec_path, predicted_path, tol_space, tol_angle,
                                report_path);
        if (*c_run) return run_run(config_path, output_dir);
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const validation_error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 3;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
