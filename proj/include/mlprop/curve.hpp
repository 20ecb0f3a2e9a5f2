#ifndef MLPROP_CURVE_HPP
#define MLPROP_CURVE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlprop/antiderivative.hpp"
#include "mlprop/errors.hpp"
#include "mlprop/grid.hpp"

namespace mlprop {

// Smooth parametrized curve on (-epsilon, inf) with gamma(0) = 0 and
// nonvanishing derivative.  Built-in families:
//   ray:    gamma(t) = t v
//   arc:    gamma(t) = (r sin(w t), r (1 - cos(w t)))
//   spiral: gamma(t) = e^{b t} (cos(a t) - 1, sin(a t))
struct CurveSpec {
    enum class Kind { ray, arc, spiral } kind = Kind::ray;
    std::array<double, 2> v = {1.0, 0.0}; // ray
    double radius = 1.0, rate = 1.0;      // arc
    double a = 1.0, b = 0.25;             // spiral
    double epsilon = 0.5;

    std::array<double, 2> gamma(double t) const {
        switch (kind) {
            case Kind::ray: return {t * v[0], t * v[1]};
            case Kind::arc:
                return {radius * std::sin(rate * t), radius * (1.0 - std::cos(rate * t))};
            case Kind::spiral: {
                const double e = std::exp(b * t);
                return {e * (std::cos(a * t) - 1.0), e * std::sin(a * t)};
            }
        }
        return {0.0, 0.0};
    }

    std::array<double, 2> dgamma(double t) const {
        switch (kind) {
            case Kind::ray: return {v[0], v[1]};
            case Kind::arc:
                return {radius * rate * std::cos(rate * t), radius * rate * std::sin(rate * t)};
            case Kind::spiral: {
                const double e = std::exp(b * t);
                return {e * (b * (std::cos(a * t) - 1.0) - a * std::sin(a * t)),
                        e * (b * std::sin(a * t) + a * std::cos(a * t))};
            }
        }
        return {0.0, 0.0};
    }

    double speed(double t) const {
        const auto d = dgamma(t);
        return std::sqrt(d[0] * d[0] + d[1] * d[1]);
    }

    double max_speed(double t_hi, int samples = 4096) const {
        double m = 0.0;
        for (int i = 0; i <= samples; ++i)
            m = std::max(m, speed(t_hi * static_cast<double>(i) / samples));
        return m;
    }

    void validate(double t_hi = 10.0) const {
        if (!(epsilon > 0.0)) throw validation_error("curve: epsilon must be > 0");
        const auto g0 = gamma(0.0);
        if (std::abs(g0[0]) > 1e-12 || std::abs(g0[1]) > 1e-12)
            throw validation_error("curve: gamma(0) must be 0");
        for (int i = 0; i <= 512; ++i) {
            const double t = -epsilon * 0.99 + (t_hi + epsilon * 0.99) * i / 512.0;
            if (speed(t) <= 1e-9)
                throw validation_error("curve: derivative vanishes near t = " +
                                       std::to_string(t));
        }
    }

    static CurveSpec from_json(const nlohmann::json& j) {
        CurveSpec c;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "ray") {
            c.kind = Kind::ray;
            const auto vv = j.at("v").get<std::vector<double>>();
            if (vv.size() != 2) throw validation_error("curve json: ray v must be 2-D");
            const double n = std::sqrt(vv[0] * vv[0] + vv[1] * vv[1]);
            if (!(n > 0.0)) throw validation_error("curve json: ray v must be nonzero");
            c.v = {vv[0] / n, vv[1] / n};
        } else if (kind == "arc") {
            c.kind = Kind::arc;
            c.radius = j.at("radius").get<double>();
            c.rate = j.at("rate").get<double>();
        } else if (kind == "spiral") {
            c.kind = Kind::spiral;
            c.a = j.at("a").get<double>();
            c.b = j.at("b").get<double>();
        } else {
            throw validation_error("curve json: unknown kind " + kind);
        }
        if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
        return c;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        switch (kind) {
            case Kind::ray:
                j["kind"] = "ray";
                j["v"] = std::vector<double>{v[0], v[1]};
                break;
            case Kind::arc:
                j["kind"] = "arc";
                j["radius"] = radius;
                j["rate"] = rate;
                break;
            case Kind::spiral:
                j["kind"] = "spiral";
                j["a"] = a;
                j["b"] = b;
                break;
        }
        j["epsilon"] = epsilon;
        return j;
    }
};

// Positive smooth weight on (-epsilon, inf).
struct WeightSpec {
    enum class Kind { unit, arc_length, power } kind = Kind::unit;
    double p = 1.0; // power: (1 + t)^{-p}
    std::function<double(double)> fn;

    double operator()(double t) const { return fn(t); }

    static WeightSpec unit() {
        WeightSpec w;
        w.kind = Kind::unit;
        w.fn = [](double) { return 1.0; };
        return w;
    }

    static WeightSpec power(double p) {
        WeightSpec w;
        w.kind = Kind::power;
        w.p = p;
        w.fn = [p](double t) { return std::pow(1.0 + t, -p); };
        return w;
    }

    static WeightSpec from_json(const nlohmann::json& j, const CurveSpec& curve);
};

// upsilon(t) = |gamma'(t)|.
inline WeightSpec arc_length_weight(const CurveSpec& curve) {
    WeightSpec w;
    w.kind = WeightSpec::Kind::arc_length;
    w.fn = [curve](double t) { return curve.speed(t); };
    return w;
}

inline WeightSpec WeightSpec::from_json(const nlohmann::json& j, const CurveSpec& curve) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "unit") return unit();
    if (kind == "arc_length") return arc_length_weight(curve);
    if (kind == "power") return power(j.at("p").get<double>());
    throw validation_error("weight json: unknown kind " + kind);
}

// Global bound T beyond which x - gamma(t) leaves the support of the field
// for every x of interest.
struct SupportHorizon {
    double T = 0.0;
};

// Scan t up to t_probe_max and return the least T after which the probed
// curve points stay clear of {domain point - support point} (inflated by
// one cell).  Errors when no such T exists below t_probe_max, which flags
// a pathological curve/field pair.
inline SupportHorizon validate_support_bounded(const CurveSpec& curve,
                                               const SampledField& field,
                                               const GridSpec& domain,
                                               double t_probe_max) {
    if (!(t_probe_max > 0.0))
        throw validation_error("validate_support_bounded: t_probe_max must be > 0");
    curve.validate(t_probe_max);

    std::vector<index_t> blo, bhi;
    field.nonzero_box(blo, bhi);
    double box_lo[2], box_hi[2];
    for (int a = 0; a < 2; ++a) {
        const double slo = field.grid.coord(a, blo[a]) - field.grid.spacing[a];
        const double shi = field.grid.coord(a, bhi[a]) + field.grid.spacing[a];
        box_lo[a] = domain.origin[a] - shi - domain.spacing[a];
        box_hi[a] = domain.upper(a) - slo + domain.spacing[a];
    }
    auto inside = [&](const std::array<double, 2>& g) {
        return g[0] >= box_lo[0] && g[0] <= box_hi[0] && g[1] >= box_lo[1] &&
               g[1] <= box_hi[1];
    };

    const double max_speed = curve.max_speed(t_probe_max);
    const double step = std::min(field.grid.min_spacing(), domain.min_spacing()) /
                        std::max(max_speed, 1e-9);
    const auto steps = static_cast<std::uint64_t>(std::ceil(t_probe_max / step));
    double last_inside = -1.0;
    for (std::uint64_t k = 0; k <= steps; ++k) {
        const double t = t_probe_max * static_cast<double>(k) / static_cast<double>(steps);
        if (inside(curve.gamma(t))) last_inside = t;
    }
    if (last_inside >= t_probe_max * (1.0 - 1e-12))
        throw validation_error(
            "validate_support_bounded: support horizon not found below t_probe_max");
    SupportHorizon h;
    h.T = std::max(last_inside, 0.0);
    return h;
}

// <T_{gamma,upsilon}, phi> = int_0^T phi(gamma(t)) upsilon(t) dt.
inline double line_distribution_pairing(const CurveSpec& curve, const WeightSpec& weight,
                                        const TestFunctionSpec& phi,
                                        const SupportHorizon& horizon) {
    return integrate_adaptive(
        [&](double t) {
            const auto g = curve.gamma(t);
            return phi.phi(g[0], g[1]) * weight(t);
        },
        0.0, horizon.T, phi.quad_tol);
}

// Direct quadrature convolution: per output cell, composite trapezoid of
// field(x - gamma(t)) upsilon(t) over [0, T] with a step that never lets
// the curve cross a cell.
inline SampledField convolve_quadrature(const SampledField& field, const CurveSpec& curve,
                                        const WeightSpec& weight,
                                        const SupportHorizon& horizon,
                                        const GridSpec& output_grid) {
    if (field.grid.dim() != 2 || output_grid.dim() != 2)
        throw validation_error("convolve_quadrature: fields must be 2-D");
    SampledField out;
    out.grid = output_grid;
    out.support_margin = 0;
    out.values.assign(output_grid.cell_count(), 0.0);
    if (horizon.T <= 0.0) return out;

    const double step =
        field.grid.min_spacing() / std::max(curve.max_speed(horizon.T), 1e-9) / 2.0;
    const auto steps = static_cast<index_t>(std::ceil(horizon.T / step));
    const double dt = horizon.T / static_cast<double>(steps);

    // Precompute the trace and weights once; reuse for every output cell.
    std::vector<std::array<double, 2>> trace(steps + 1);
    std::vector<double> wgt(steps + 1);
    for (index_t k = 0; k <= steps; ++k) {
        const double t = dt * static_cast<double>(k);
        trace[k] = curve.gamma(t);
        wgt[k] = weight(t) * dt * ((k == 0 || k == steps) ? 0.5 : 1.0);
    }

    const index_t n1 = output_grid.shape[1];
    for (index_t i = 0; i < output_grid.shape[0]; ++i) {
        const double x0 = output_grid.coord(0, i);
        for (index_t j = 0; j < n1; ++j) {
            const double x1 = output_grid.coord(1, j);
            double acc = 0.0;
            for (index_t k = 0; k <= steps; ++k) {
                const double p[2] = {x0 - trace[k][0], x1 - trace[k][1]};
                acc += wgt[k] * field.interpolate(p);
            }
            out.values[i * n1 + j] = acc;
        }
    }
    return out;
}

// Pullback construction: W(x, y) = field(x - gamma(y)) upsilon(y) on a
// uniform y-grid over (-eps/2, T], cumulative antiderivative along the
// negative y axis (a suffix integral), sliced at y = 0.
inline SampledField convolve_pullback(const SampledField& field, const CurveSpec& curve,
                                      const WeightSpec& weight,
                                      const SupportHorizon& horizon, index_t y_resolution,
                                      std::size_t memory_budget_bytes = std::size_t{1}
                                                                       << 31) {
    if (field.grid.dim() != 2)
        throw validation_error("convolve_pullback: field must be 2-D");
    if (y_resolution < 32)
        throw validation_error("convolve_pullback: y_resolution must be >= 32");
    const index_t n0 = field.grid.shape[0], n1 = field.grid.shape[1];
    const std::size_t bytes = sizeof(double) * n0 * n1 * y_resolution;
    if (bytes > memory_budget_bytes)
        throw validation_error("convolve_pullback: memory budget exceeded, requires " +
                               std::to_string(bytes) + " bytes");

    const double y_lo = -curve.epsilon / 2.0;
    const double dy = (horizon.T - y_lo) / static_cast<double>(y_resolution - 1);

    std::vector<double> W(n0 * n1 * y_resolution);
    for (index_t k = 0; k < y_resolution; ++k) {
        const double y = y_lo + dy * static_cast<double>(k);
        const auto g = curve.gamma(y);
        const double uy = weight(y);
        for (index_t i = 0; i < n0; ++i) {
            const double x0 = field.grid.coord(0, i);
            for (index_t j = 0; j < n1; ++j) {
                const double p[2] = {x0 - g[0], field.grid.coord(1, j) - g[1]};
                W[(i * n1 + j) * y_resolution + k] = field.interpolate(p) * uy;
            }
        }
    }

    // Suffix trapezoid along y, in place: W[k] <- int_{y_k}^{T} W ds.
    for (index_t c = 0; c < n0 * n1; ++c) {
        double* line = &W[c * y_resolution];
        double acc = 0.0, prev = line[y_resolution - 1];
        line[y_resolution - 1] = 0.0;
        for (index_t k = y_resolution - 1; k-- > 0;) {
            const double cur = line[k];
            acc += 0.5 * dy * (prev + cur);
            prev = cur;
            line[k] = acc;
        }
    }

    // Slice at y = 0 with linear interpolation between bracketing nodes.
    const double fk = (0.0 - y_lo) / dy;
    const auto k0 = static_cast<index_t>(std::floor(fk));
    const double frac = fk - static_cast<double>(k0);
    SampledField out;
    out.grid = field.grid;
    out.support_margin = 0;
    out.values.resize(n0 * n1);
    for (index_t c = 0; c < n0 * n1; ++c) {
        const double* line = &W[c * y_resolution];
        const double v0 = line[k0];
        const double v1 = k0 + 1 < y_resolution ? line[k0 + 1] : v0;
        out.values[c] = (1.0 - frac) * v0 + frac * v1;
    }
    return out;
}

} // namespace mlprop

#endif
