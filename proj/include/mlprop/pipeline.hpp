#ifndef MLPROP_PIPELINE_HPP
#define MLPROP_PIPELINE_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlprop/antiderivative.hpp"
#include "mlprop/curve.hpp"
#include "mlprop/errors.hpp"
#include "mlprop/grid.hpp"
#include "mlprop/io.hpp"
#include "mlprop/phantom.hpp"
#include "mlprop/propagation.hpp"
#include "mlprop/wavefront.hpp"

namespace mlprop {

// End-to-end experiment: phantom -> operator -> estimated wavefront sets
// on both sides -> predicted superset -> containment verdict, with every
// artifact written to the output directory.
struct OperatorConfig {
    enum class Kind { antideriv, convolve } kind = Kind::antideriv;
    // antideriv
    Direction v = Direction::normalized({1.0, 0.0});
    std::string method = "cumulative"; // cumulative | spectral | quadrature | pullback
    // convolve
    CurveSpec curve;
    WeightSpec weight = WeightSpec::unit();
    nlohmann::json weight_json = {{"kind", "unit"}};
    std::optional<double> horizon;  // explicit truncation bound
    double t_probe_max = 20.0;      // scan bound for the automatic horizon
    index_t y_resolution = 256;     // pullback method
};

struct ExperimentConfig {
    GridSpec grid;
    PhantomSpec phantom;
    Mollification moll;
    OperatorConfig op;
    EstimatorParams estimator;
    std::optional<double> threshold_order_output; // override for the output side
    double tol_space = 0.0;  // 0: derived from the window radius
    double tol_angle = 0.0;  // 0: derived from the direction count
    std::optional<double> predict_horizon;
    std::string output_dir = ".";
    std::uint64_t seed = 0; // recorded for provenance; the pipeline is deterministic

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        const auto& jg = j.at("grid");
        std::vector<std::pair<double, double>> extent;
        for (const auto& e : jg.at("extent"))
            extent.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
        c.grid = make_grid(extent, jg.at("resolution").get<std::vector<index_t>>());

        std::tie(c.phantom, c.moll) = parse_phantom_json(j.at("phantom"));

        const auto& jo = j.at("operator");
        const std::string kind = jo.at("kind").get<std::string>();
        if (kind == "antideriv") {
            c.op.kind = OperatorConfig::Kind::antideriv;
            c.op.v = Direction::normalized(jo.at("v").get<std::vector<double>>());
            c.op.method = jo.value("method", std::string("cumulative"));
            if (c.op.method != "cumulative" && c.op.method != "spectral")
                throw validation_error("config: antideriv method must be cumulative|spectral");
        } else if (kind == "convolve") {
            c.op.kind = OperatorConfig::Kind::convolve;
            c.op.curve = CurveSpec::from_json(jo.at("curve"));
            c.op.weight_json = jo.value("weight", nlohmann::json{{"kind", "unit"}});
            c.op.weight = WeightSpec::from_json(c.op.weight_json, c.op.curve);
            c.op.method = jo.value("method", std::string("quadrature"));
            if (c.op.method != "quadrature" && c.op.method != "pullback")
                throw validation_error("config: convolve method must be quadrature|pullback");
            if (jo.contains("y_resolution"))
                c.op.y_resolution = jo["y_resolution"].get<index_t>();
        } else {
            throw validation_error("config: operator kind must be antideriv|convolve");
        }
        if (jo.contains("horizon")) c.op.horizon = jo["horizon"].get<double>();
        if (jo.contains("t_probe_max")) c.op.t_probe_max = jo["t_probe_max"].get<double>();

        if (j.contains("estimator")) {
            const auto& je = j["estimator"];
            c.estimator.window_radius_cells =
                je.value("window_radius_cells", c.estimator.window_radius_cells);
            c.estimator.cone_half_width =
                je.value("cone_half_width", c.estimator.cone_half_width);
            c.estimator.dirs = je.value("dirs", c.estimator.dirs);
            c.estimator.threshold_order =
                je.value("threshold_order", c.estimator.threshold_order);
            c.estimator.stride_cells = je.value("stride_cells", c.estimator.stride_cells);
            c.estimator.r_min_cells = je.value("r_min_cells", c.estimator.r_min_cells);
            if (je.contains("threshold_order_output"))
                c.threshold_order_output = je["threshold_order_output"].get<double>();
        }
        if (j.contains("tolerances")) {
            c.tol_space = j["tolerances"].value("tol_space", 0.0);
            c.tol_angle = j["tolerances"].value("tol_angle", 0.0);
        }
        if (j.contains("predict_horizon"))
            c.predict_horizon = j["predict_horizon"].get<double>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("config: ") + e.what());
    }
    return c;
}

inline nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["grid"]["extent"] = nlohmann::ordered_json::array();
    for (index_t a = 0; a < grid.dim(); ++a)
        j["grid"]["extent"].push_back(
            {grid.origin[a], grid.origin[a] + static_cast<double>(grid.shape[a]) *
                                                  grid.spacing[a]});
    j["grid"]["resolution"] = grid.shape;

    nlohmann::ordered_json jp;
    jp["kind"] = to_string(phantom.kind);
    if (!phantom.center.empty()) jp["center"] = phantom.center;
    if (phantom.radius > 0.0) jp["radius"] = phantom.radius;
    if (!phantom.normal.empty()) {
        jp["normal"] = phantom.normal;
        jp["offset"] = phantom.offset;
        jp["cutoff_center"] = phantom.cutoff_center;
        jp["cutoff_radius"] = phantom.cutoff_radius;
    }
    if (!phantom.point.empty()) jp["point"] = phantom.point;
    if (!phantom.seg_a.empty()) {
        jp["a"] = phantom.seg_a;
        jp["b"] = phantom.seg_b;
    }
    jp["amplitude"] = phantom.amplitude;
    jp["sigma"] = moll.sigma;
    j["phantom"] = jp;

    nlohmann::ordered_json jo;
    if (op.kind == OperatorConfig::Kind::antideriv) {
        jo["kind"] = "antideriv";
        jo["v"] = op.v.components;
    } else {
        jo["kind"] = "convolve";
        jo["curve"] = op.curve.to_json();
        jo["weight"] = op.weight_json;
        jo["y_resolution"] = op.y_resolution;
    }
    jo["method"] = op.method;
    if (op.horizon) jo["horizon"] = *op.horizon;
    jo["t_probe_max"] = op.t_probe_max;
    j["operator"] = jo;

    j["estimator"] = {{"window_radius_cells", estimator.window_radius_cells},
                      {"cone_half_width", estimator.cone_half_width},
                      {"dirs", estimator.dirs},
                      {"threshold_order", estimator.threshold_order},
                      {"stride_cells", estimator.stride_cells},
                      {"r_min_cells", estimator.r_min_cells}};
    if (threshold_order_output)
        j["estimator"]["threshold_order_output"] = *threshold_order_output;
    j["tolerances"] = {{"tol_space", tol_space}, {"tol_angle", tol_angle}};
    if (predict_horizon) j["predict_horizon"] = *predict_horizon;
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    return j;
}

struct PipelineResult {
    bool contained = false;
    bool microlocal_clean = true; // antideriv runs only
    ContainmentReport containment;
    index_t input_flags = 0;
    index_t output_flags = 0;
    std::string output_dir;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw io_error("write failed: " + path.string());
}

// Per-direction decay orders along the middle row of the position lattice,
// for both the input and output estimates (same sample ordering).
inline void write_scanline_csv(const std::filesystem::path& path, const GridSpec& positions,
                               index_t dirs, const WavefrontSet& wf_in,
                               const WavefrontSet& wf_out) {
    std::ostringstream ss;
    ss << "x1,x2,theta_rad,input_order,output_order\n";
    const index_t mid = positions.shape[0] / 2;
    for (index_t j = 0; j < positions.shape[1]; ++j) {
        const index_t base = (mid * positions.shape[1] + j) * dirs;
        for (index_t d = 0; d < dirs; ++d) {
            const auto& a = wf_in.samples[base + d];
            const auto& b = wf_out.samples[base + d];
            ss << format_double(a.x[0]) << ',' << format_double(a.x[1]) << ','
               << format_double(a.theta.angle()) << ',' << format_double(a.decay_order)
               << ',' << format_double(b.decay_order) << '\n';
        }
    }
    write_text(path, ss.str());
}

} // namespace detail

// Runs the whole experiment and writes input.mlf1, output.mlf1,
// wf_input.csv, wf_output.csv, predicted.json, containment.json,
// microlocal.json (antiderivative runs), scanline.csv, summary.json and
// config_resolved.json into the output directory.  A FAILED marker file is
// left behind when containment does not hold.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    detail::write_text(dir / "config_resolved.json", cfg.to_json().dump(2) + "\n");

    // 1. phantom
    SampledField input = rasterize(cfg.phantom, cfg.grid, cfg.moll);
    write_field(input, (dir / "input.mlf1").string());

    // 2. operator
    SampledField output;
    double horizon_T = 0.0;
    if (cfg.op.kind == OperatorConfig::Kind::antideriv) {
        output = cfg.op.method == "spectral"
                     ? spectral_antiderivative(input, cfg.op.v)
                     : cumulative_antiderivative(input, cfg.op.v, cfg.grid);
    } else {
        SupportHorizon h;
        if (cfg.op.horizon) {
            h.T = *cfg.op.horizon;
            cfg.op.curve.validate(h.T);
        } else {
            h = validate_support_bounded(cfg.op.curve, input, cfg.grid, cfg.op.t_probe_max);
        }
        horizon_T = h.T;
        output = cfg.op.method == "pullback"
                     ? convolve_pullback(input, cfg.op.curve, cfg.op.weight, h,
                                         cfg.op.y_resolution)
                     : convolve_quadrature(input, cfg.op.curve, cfg.op.weight, h, cfg.grid);
    }
    write_field(output, (dir / "output.mlf1").string());

    // 3. wavefront estimation on both sides, shared discretization
    WindowSpec window;
    window.radius =
        cfg.estimator.window_radius_cells * std::max(cfg.grid.spacing[0], cfg.grid.spacing[1]);
    const GridSpec positions =
        make_position_lattice(cfg.grid, window, cfg.estimator.stride_cells);
    const auto dirs = discretize_directions(cfg.estimator.dirs);
    WavefrontSet wf_in = estimate_wavefront(input, positions, dirs, window,
                                            cfg.estimator.cone_half_width,
                                            cfg.estimator.threshold_order,
                                            cfg.estimator.r_min_cells);
    const double out_threshold =
        cfg.threshold_order_output.value_or(cfg.estimator.threshold_order);
    WavefrontSet wf_out = estimate_wavefront(output, positions, dirs, window,
                                             cfg.estimator.cone_half_width, out_threshold,
                                             cfg.estimator.r_min_cells);
    write_wavefront_csv(wf_in, (dir / "wf_input.csv").string());
    write_wavefront_csv(wf_out, (dir / "wf_output.csv").string());

    // 4. prediction
    const double diag =
        distance(std::vector<double>{cfg.grid.origin[0], cfg.grid.origin[1]},
                 std::vector<double>{cfg.grid.upper(0), cfg.grid.upper(1)});
    PredictedSet predicted;
    if (cfg.op.kind == OperatorConfig::Kind::antideriv) {
        predicted = predict_ray(wf_in, cfg.op.v, cfg.predict_horizon.value_or(diag),
                                std::sin(M_PI / static_cast<double>(cfg.estimator.dirs)));
    } else {
        const double t_step =
            cfg.grid.min_spacing() / std::max(cfg.op.curve.max_speed(horizon_T), 1e-9);
        predicted = predict_curve(wf_in, cfg.op.curve,
                                  cfg.predict_horizon.value_or(horizon_T), t_step,
                                  std::sin(M_PI / static_cast<double>(cfg.estimator.dirs)));
    }
    detail::write_text(dir / "predicted.json", to_json(predicted).dump(2) + "\n");

    // 5. containment verdict
    const double tol_space = cfg.tol_space > 0.0 ? cfg.tol_space : 2.0 * window.radius;
    const double tol_angle =
        cfg.tol_angle > 0.0
            ? cfg.tol_angle
            : 2.0 * (2.0 * M_PI / static_cast<double>(cfg.estimator.dirs));
    PipelineResult result;
    result.containment = check_containment(wf_out, predicted, tol_space, tol_angle);
    result.contained = result.containment.all_contained();
    detail::write_text(dir / "containment.json",
                       to_json(result.containment).dump(2) + "\n");

    if (cfg.op.kind == OperatorConfig::Kind::antideriv) {
        const MicrolocalBoundReport mb =
            microlocal_bound_check(wf_out, wf_in, cfg.op.v, tol_space, tol_angle);
        result.microlocal_clean = mb.violations.empty();
        detail::write_text(dir / "microlocal.json", to_json(mb).dump(2) + "\n");
    }

    detail::write_scanline_csv(dir / "scanline.csv", positions, cfg.estimator.dirs, wf_in,
                               wf_out);

    for (const auto& s : wf_in.samples) result.input_flags += s.singular ? 1 : 0;
    for (const auto& s : wf_out.samples) result.output_flags += s.singular ? 1 : 0;
    result.output_dir = dir.string();

    nlohmann::ordered_json summary;
    summary["contained"] = result.contained;
    summary["microlocal_clean"] = result.microlocal_clean;
    summary["input_singular_flags"] = result.input_flags;
    summary["output_singular_flags"] = result.output_flags;
    summary["checked"] = result.containment.checked;
    summary["violations"] = result.containment.violations.size();
    summary["tol_space"] = tol_space;
    summary["tol_angle"] = tol_angle;
    if (cfg.op.kind == OperatorConfig::Kind::convolve) summary["horizon"] = horizon_T;
    detail::write_text(dir / "summary.json", summary.dump(2) + "\n");

    if (!result.contained) detail::write_text(dir / "FAILED", "containment violated\n");
    return result;
}

} // namespace mlprop

#endif
