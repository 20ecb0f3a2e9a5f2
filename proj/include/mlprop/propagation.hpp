#ifndef MLPROP_PROPAGATION_HPP
#define MLPROP_PROPAGATION_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlprop/curve.hpp"
#include "mlprop/errors.hpp"
#include "mlprop/grid.hpp"

namespace mlprop {

// R_v(x) = {x + t v : t >= 0}.
struct Ray {
    std::vector<double> base;
    Direction v;

    bool contains(std::span<const double> p, double tol) const {
        double t = 0.0;
        for (index_t a = 0; a < base.size(); ++a) t += (p[a] - base[a]) * v[a];
        if (t < -tol) return false;
        double d2 = 0.0;
        for (index_t a = 0; a < base.size(); ++a) {
            const double r = p[a] - base[a] - t * v[a];
            d2 += r * r;
        }
        return std::sqrt(d2) <= tol;
    }
};

// One propagated phase-space point: position, direction, generating t.
struct PropagatedSample {
    std::vector<double> x;
    Direction theta;
    double t = 0.0;
};

// The theorems' predicted superset: the input's wavefront set plus its
// translates along the ray/curve at orthogonal directions.
struct PredictedSet {
    WavefrontSet base_wf;
    std::vector<PropagatedSample> propagated;
    double horizon = 0.0;
};

struct ContainmentViolation {
    PhaseSpaceSample sample;
    double nearest_distance = 0.0;
    double nearest_angle = 0.0;
};

struct ContainmentReport {
    index_t checked = 0;
    index_t contained = 0;
    std::vector<ContainmentViolation> violations;
    double tol_space = 0.0;
    double tol_angle = 0.0;

    bool all_contained() const { return violations.empty(); }
};

struct MicrolocalBoundReport {
    Direction v;
    double tol_space = 0.0;
    double tol_angle = 0.0;
    index_t checked = 0;
    std::vector<PhaseSpaceSample> violations; // neither near WF(w) nor near-characteristic
};

// U = union over t in [0, t1] of (U0 + t v), U0 a finite union of boxes.
struct TubeSpec {
    struct Box {
        std::array<double, 2> lo, hi;
        bool contains(std::span<const double> p, double pad) const {
            return p[0] >= lo[0] - pad && p[0] <= hi[0] + pad && p[1] >= lo[1] - pad &&
                   p[1] <= hi[1] + pad;
        }
    };
    std::vector<Box> boxes;
    Direction v;
    double t1 = 0.0;

    bool in_base(std::span<const double> p, double pad) const {
        for (const auto& b : boxes)
            if (b.contains(p, pad)) return true;
        return false;
    }

    // Exact interval test: exists t in [0, t1] with p - t v inside a box.
    bool in_tube(std::span<const double> p, double pad) const {
        for (const auto& b : boxes) {
            double t_lo = 0.0, t_hi = t1;
            bool ok = true;
            for (int a = 0; a < 2; ++a) {
                const double lo = b.lo[a] - pad, hi = b.hi[a] + pad;
                if (std::abs(v[a]) < 1e-15) {
                    if (p[a] < lo || p[a] > hi) ok = false;
                    continue;
                }
                double ta = (p[a] - hi) / v[a];
                double tb = (p[a] - lo) / v[a];
                if (ta > tb) std::swap(ta, tb);
                t_lo = std::max(t_lo, ta);
                t_hi = std::min(t_hi, tb);
            }
            if (ok && t_lo <= t_hi) return true;
        }
        return false;
    }
};

// WF(w) plus {(x + t v, eta0) : (x, eta0) in WF(w), eta0 . v = 0, t >= 0},
// rays truncated at the horizon and discretized at the position-lattice
// step.
inline PredictedSet predict_ray(const WavefrontSet& wf, const Direction& v,
                                double horizon, double orth_tol = 1e-9,
                                double step_override = 0.0) {
    if (!(horizon > 0.0)) throw validation_error("predict_ray: horizon must be > 0");
    PredictedSet out;
    out.base_wf = wf;
    out.horizon = horizon;
    const double step =
        step_override > 0.0
            ? step_override
            : (wf.position_grid.shape.empty() ? horizon / 64.0
                                              : wf.position_grid.min_spacing());
    for (const auto& s : wf.samples) {
        if (!s.singular) continue;
        double dot = 0.0;
        for (index_t a = 0; a < s.x.size(); ++a) dot += s.theta[a] * v[a];
        if (std::abs(dot) > orth_tol) continue;
        const auto steps = static_cast<index_t>(std::floor(horizon / step));
        for (index_t k = 0; k <= steps; ++k) {
            const double t = static_cast<double>(k) * step;
            PropagatedSample p;
            p.x = s.x;
            for (index_t a = 0; a < p.x.size(); ++a) p.x[a] += t * v[a];
            p.theta = s.theta;
            p.t = t;
            out.propagated.push_back(std::move(p));
        }
    }
    return out;
}

// Curve version: positions x0 + gamma(t) at every probed t with
// xi . gamma'(t) ~ 0, refined by bisection around sign changes.
inline PredictedSet predict_curve(const WavefrontSet& wf, const CurveSpec& curve,
                                  double horizon, double t_step,
                                  double orth_tol = 1e-9) {
    if (!(horizon > 0.0)) throw validation_error("predict_curve: horizon must be > 0");
    if (!(t_step > 0.0)) throw validation_error("predict_curve: t_step must be > 0");
    PredictedSet out;
    out.base_wf = wf;
    out.horizon = horizon;
    const auto steps = static_cast<index_t>(std::floor(horizon / t_step));
    for (const auto& s : wf.samples) {
        if (!s.singular) continue;
        auto dot = [&](double t) {
            const auto d = curve.dgamma(t);
            return s.theta[0] * d[0] + s.theta[1] * d[1];
        };
        auto emit = [&](double t) {
            const auto g = curve.gamma(t);
            PropagatedSample p;
            p.x = {s.x[0] + g[0], s.x[1] + g[1]};
            p.theta = s.theta;
            p.t = t;
            out.propagated.push_back(std::move(p));
        };
        double prev = dot(0.0);
        if (std::abs(prev) / curve.speed(0.0) <= orth_tol) emit(0.0);
        for (index_t k = 1; k <= steps; ++k) {
            const double t = static_cast<double>(k) * t_step;
            const double cur = dot(t);
            if (std::abs(cur) / curve.speed(t) <= orth_tol) {
                emit(t);
            } else if (prev * cur < 0.0) {
                // bisect the sign change
                double a = static_cast<double>(k - 1) * t_step, b = t;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (a + b);
                    if (dot(a) * dot(mid) <= 0.0)
                        b = mid;
                    else
                        a = mid;
                }
                emit(0.5 * (a + b));
            }
            prev = cur;
        }
    }
    return out;
}

namespace detail {

// Discrete direction sets land exactly on tolerance boundaries (e.g. a flag
// two angular steps from a predicted direction), so comparisons carry a small
// absolute slack to keep roundoff from flipping a boundary case.
constexpr double kTolSlack = 1e-9;

inline bool near_sample(std::span<const double> x, const Direction& theta,
                        std::span<const double> px, const Direction& ptheta,
                        double tol_space, double tol_angle, double& dist, double& ang) {
    dist = distance(x, px);
    ang = angle_between_mod_sign(theta, ptheta);
    return dist <= tol_space + kTolSlack && ang <= tol_angle + kTolSlack;
}

} // namespace detail

// Each singular-flagged estimated sample must lie within tol_space of a
// predicted position carrying a direction within tol_angle (mod sign).
inline ContainmentReport check_containment(const WavefrontSet& estimated,
                                           const PredictedSet& predicted,
                                           double tol_space, double tol_angle) {
    if (!(tol_space > 0.0 && tol_angle > 0.0))
        throw validation_error("check_containment: tolerances must be > 0");
    ContainmentReport rep;
    rep.tol_space = tol_space;
    rep.tol_angle = tol_angle;
    for (const auto& s : estimated.samples) {
        if (!s.singular) continue;
        ++rep.checked;
        bool hit = false;
        double best_d = 1e300, best_a = 1e300;
        double d, a;
        for (const auto& b : predicted.base_wf.samples) {
            if (!b.singular) continue;
            if (detail::near_sample(s.x, s.theta, b.x, b.theta, tol_space, tol_angle, d, a)) {
                hit = true;
                break;
            }
            if (d <= best_d) {
                best_d = d;
                best_a = std::min(best_a, a);
            }
        }
        if (!hit) {
            for (const auto& p : predicted.propagated) {
                if (detail::near_sample(s.x, s.theta, p.x, p.theta, tol_space, tol_angle,
                                        d, a)) {
                    hit = true;
                    break;
                }
                if (d <= best_d) {
                    best_d = d;
                    best_a = std::min(best_a, a);
                }
            }
        }
        if (hit) {
            ++rep.contained;
        } else {
            rep.violations.push_back({s, best_d, best_a});
        }
    }
    return rep;
}

// WF(u) subset Char(D_v) union WF(D_v u): flags output samples that are
// neither near an input sample nor near-characteristic (|theta . v| small).
inline MicrolocalBoundReport microlocal_bound_check(const WavefrontSet& estimated_out,
                                                    const WavefrontSet& estimated_in,
                                                    const Direction& v, double tol_space,
                                                    double tol_angle) {
    if (estimated_out.position_grid != estimated_in.position_grid ||
        estimated_out.direction_count != estimated_in.direction_count)
        throw validation_error("microlocal_bound_check: mismatched discretizations");
    MicrolocalBoundReport rep;
    rep.v = v;
    rep.tol_space = tol_space;
    rep.tol_angle = tol_angle;
    for (const auto& s : estimated_out.samples) {
        if (!s.singular) continue;
        ++rep.checked;
        double dot = 0.0;
        for (index_t a = 0; a < s.x.size(); ++a) dot += s.theta[a] * v[a];
        if (std::abs(dot) <= std::sin(tol_angle) + detail::kTolSlack)
            continue; // characteristic
        bool near = false;
        double d, a;
        for (const auto& in : estimated_in.samples) {
            if (!in.singular) continue;
            if (detail::near_sample(s.x, s.theta, in.x, in.theta, tol_space, tol_angle, d,
                                    a)) {
                near = true;
                break;
            }
        }
        if (!near) rep.violations.push_back(s);
    }
    return rep;
}

struct TubeReport {
    bool hypothesis_out_clear_base = false; // WF(I_v w) misses U0 x {eta0}
    bool hypothesis_in_clear_tube = false;  // WF(w) misses U x {eta0}
    bool conclusion_clear_tube = false;     // WF(I_v w) misses U x {eta0}
    bool vacuous = false;
    bool holds = false;
};

// Implication of the tube-strengthening statement on the discrete sets.
inline TubeReport tube_extension_check(const WavefrontSet& estimated_out,
                                       const WavefrontSet& estimated_in,
                                       const TubeSpec& tube, const Direction& eta0,
                                       double tol_space, double tol_angle) {
    double dot = 0.0;
    for (index_t a = 0; a < eta0.dim(); ++a) dot += eta0[a] * tube.v[a];
    if (std::abs(dot) > 1e-9)
        throw validation_error("tube_extension_check: eta0 must be orthogonal to v");

    auto clear_of = [&](const WavefrontSet& wf, auto&& member) {
        for (const auto& s : wf.samples) {
            if (!s.singular) continue;
            if (angle_between_mod_sign(s.theta, eta0) > tol_angle) continue;
            if (member(s.x)) return false;
        }
        return true;
    };

    TubeReport rep;
    rep.hypothesis_out_clear_base = clear_of(
        estimated_out, [&](std::span<const double> x) { return tube.in_base(x, tol_space); });
    rep.hypothesis_in_clear_tube = clear_of(
        estimated_in, [&](std::span<const double> x) { return tube.in_tube(x, tol_space); });
    rep.conclusion_clear_tube = clear_of(
        estimated_out, [&](std::span<const double> x) { return tube.in_tube(x, tol_space); });
    rep.vacuous = !(rep.hypothesis_out_clear_base && rep.hypothesis_in_clear_tube);
    rep.holds = rep.vacuous || rep.conclusion_clear_tube;
    return rep;
}

// JSON serialization of predictions and reports.
inline nlohmann::ordered_json to_json(const PredictedSet& p) {
    nlohmann::ordered_json j;
    j["base"] = nlohmann::ordered_json::array();
    for (const auto& s : p.base_wf.samples) {
        if (!s.singular) continue;
        j["base"].push_back({{"x", s.x}, {"theta_rad", s.theta.angle()}});
    }
    j["propagated"] = nlohmann::ordered_json::array();
    for (const auto& s : p.propagated) {
        j["propagated"].push_back(
            {{"x", s.x}, {"theta_rad", s.theta.angle()}, {"t", s.t}});
    }
    j["horizon"] = p.horizon;
    return j;
}

inline PredictedSet predicted_set_from_json(const nlohmann::json& j) {
    PredictedSet p;
    try {
        for (const auto& e : j.at("base")) {
            PhaseSpaceSample s;
            s.x = e.at("x").get<std::vector<double>>();
            const double a = e.at("theta_rad").get<double>();
            s.theta = Direction::normalized({std::cos(a), std::sin(a)});
            s.singular = true;
            p.base_wf.samples.push_back(std::move(s));
        }
        for (const auto& e : j.at("propagated")) {
            PropagatedSample s;
            s.x = e.at("x").get<std::vector<double>>();
            const double a = e.at("theta_rad").get<double>();
            s.theta = Direction::normalized({std::cos(a), std::sin(a)});
            s.t = e.at("t").get<double>();
            p.propagated.push_back(std::move(s));
        }
        p.horizon = j.value("horizon", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("predicted set json: ") + e.what());
    }
    return p;
}

inline nlohmann::ordered_json to_json(const ContainmentReport& r) {
    nlohmann::ordered_json j;
    j["checked"] = r.checked;
    j["contained"] = r.contained;
    j["tolerances"] = {{"tol_space", r.tol_space}, {"tol_angle", r.tol_angle}};
    j["violations"] = nlohmann::ordered_json::array();
    for (const auto& v : r.violations) {
        j["violations"].push_back({{"x", v.sample.x},
                                   {"theta_rad", v.sample.theta.angle()},
                                   {"nearest_distance", v.nearest_distance},
                                   {"nearest_angle", v.nearest_angle}});
    }
    return j;
}

inline nlohmann::ordered_json to_json(const MicrolocalBoundReport& r) {
    nlohmann::ordered_json j;
    j["characteristic_condition"] = "abs(theta . v) <= sin(tol_angle)";
    j["v"] = r.v.components;
    j["tolerances"] = {{"tol_space", r.tol_space}, {"tol_angle", r.tol_angle}};
    j["checked"] = r.checked;
    j["violations"] = nlohmann::ordered_json::array();
    for (const auto& s : r.violations)
        j["violations"].push_back({{"x", s.x}, {"theta_rad", s.theta.angle()}});
    return j;
}

inline nlohmann::ordered_json to_json(const TubeReport& r) {
    nlohmann::ordered_json j;
    j["hypothesis_out_clear_base"] = r.hypothesis_out_clear_base;
    j["hypothesis_in_clear_tube"] = r.hypothesis_in_clear_tube;
    j["conclusion_clear_tube"] = r.conclusion_clear_tube;
    j["vacuous"] = r.vacuous;
    j["holds"] = r.holds;
    return j;
}

} // namespace mlprop

#endif
