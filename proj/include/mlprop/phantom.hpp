#ifndef MLPROP_PHANTOM_HPP
#define MLPROP_PHANTOM_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlprop/errors.hpp"
#include "mlprop/grid.hpp"

namespace mlprop {

enum class PhantomKind {
    bump,
    disk_indicator,
    half_plane_indicator,
    point_delta,
    segment_delta,
};

inline std::string to_string(PhantomKind k) {
    switch (k) {
        case PhantomKind::bump: return "bump";
        case PhantomKind::disk_indicator: return "disk_indicator";
        case PhantomKind::half_plane_indicator: return "half_plane_indicator";
        case PhantomKind::point_delta: return "point_delta";
        case PhantomKind::segment_delta: return "segment_delta";
    }
    return "?";
}

// Analytic test distribution with a known exact wavefront set (n = 2).
struct PhantomSpec {
    PhantomKind kind = PhantomKind::bump;
    std::vector<double> center;     // bump, disk
    double radius = 0.0;            // bump, disk
    std::vector<double> normal;     // half-plane boundary normal (unit)
    double offset = 0.0;            // half-plane: boundary is {x.n = offset}
    std::vector<double> cutoff_center = {0.0, 0.0}; // half-plane radial cutoff
    double cutoff_radius = 1.5;
    std::vector<double> point;      // point delta
    std::vector<double> seg_a, seg_b; // segment delta endpoints
    double amplitude = 1.0;

    void validate() const {
        switch (kind) {
            case PhantomKind::bump:
            case PhantomKind::disk_indicator:
                if (center.size() != 2) throw validation_error("phantom: center must be 2-D");
                if (!(radius > 0.0)) throw validation_error("phantom: radius must be > 0");
                break;
            case PhantomKind::half_plane_indicator:
                if (normal.size() != 2) throw validation_error("phantom: normal must be 2-D");
                if (!(cutoff_radius > 0.0))
                    throw validation_error("phantom: cutoff_radius must be > 0");
                break;
            case PhantomKind::point_delta:
                if (point.size() != 2) throw validation_error("phantom: point must be 2-D");
                break;
            case PhantomKind::segment_delta:
                if (seg_a.size() != 2 || seg_b.size() != 2)
                    throw validation_error("phantom: segment endpoints must be 2-D");
                if (distance(seg_a, seg_b) == 0.0)
                    throw validation_error("phantom: segment endpoints must be distinct");
                break;
        }
    }
};

// Smoothing width in physical units.  sigma = 0 is only admissible for
// kinds that are already bounded functions.
struct Mollification {
    double sigma = 0.0;
};

namespace detail {

// C-infinity bump profile on [0,1): exp(1 - 1/(1 - s^2)), 0 for s >= 1.
inline double bump_profile(double s) {
    const double s2 = s * s;
    if (s2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s2));
}

// C-infinity plateau: 1 for s <= plateau, 0 for s >= 1, smooth between.
inline double plateau_profile(double s, double plateau = 0.5) {
    // erf ramp, clipped to exactly 1 / 0 outside the transition zone; the
    // Gaussian-type spectrum keeps the cutoff invisible to decay-order fits
    // (an exp(-1/u)-style ramp has a boundary layer whose pre-asymptotic
    // spectrum mimics a genuine singularity at practical resolutions).
    const double mid = 0.5 * (plateau + 1.0);
    const double sigma = (1.0 - plateau) / (2.0 * 5.0 * std::numbers::sqrt2);
    const double z = (s - mid) / (sigma * std::numbers::sqrt2);
    if (z >= 5.0) return 0.0;
    if (z <= -5.0) return 1.0;
    return 0.5 * std::erfc(z);
}

// Mollifier kernel truncated at radius 3*sigma, sampled on the grid step
// and normalized so the discrete mass is exactly 1.
struct DiscreteKernel {
    long rad0 = 0, rad1 = 0; // half-extent in cells per axis
    std::vector<double> weights; // (2*rad0+1) x (2*rad1+1)

    static DiscreteKernel build(const GridSpec& grid, double sigma) {
        DiscreteKernel k;
        const double R = 3.0 * sigma;
        k.rad0 = static_cast<long>(std::ceil(R / grid.spacing[0]));
        k.rad1 = static_cast<long>(std::ceil(R / grid.spacing[1]));
        k.weights.assign(static_cast<std::size_t>((2 * k.rad0 + 1) * (2 * k.rad1 + 1)), 0.0);
        double sum = 0.0;
        for (long i = -k.rad0; i <= k.rad0; ++i) {
            for (long j = -k.rad1; j <= k.rad1; ++j) {
                const double x = static_cast<double>(i) * grid.spacing[0];
                const double y = static_cast<double>(j) * grid.spacing[1];
                const double w = bump_profile(std::sqrt(x * x + y * y) / R);
                k.weights[k.flat(i, j)] = w;
                sum += w;
            }
        }
        const double mass = sum * grid.cell_volume();
        if (!(mass > 0.0)) throw validation_error("mollifier: sigma too small for grid");
        for (double& w : k.weights) w /= mass;
        return k;
    }

    std::size_t flat(long i, long j) const {
        return static_cast<std::size_t>((i + rad0) * (2 * rad1 + 1) + (j + rad1));
    }
};

// Physical bounding box of the phantom geometry (before mollification).
inline void geometry_box(const PhantomSpec& p, double lo[2], double hi[2]) {
    switch (p.kind) {
        case PhantomKind::bump:
        case PhantomKind::disk_indicator:
            for (int a = 0; a < 2; ++a) {
                lo[a] = p.center[a] - p.radius;
                hi[a] = p.center[a] + p.radius;
            }
            break;
        case PhantomKind::half_plane_indicator:
            for (int a = 0; a < 2; ++a) {
                lo[a] = p.cutoff_center[a] - p.cutoff_radius;
                hi[a] = p.cutoff_center[a] + p.cutoff_radius;
            }
            break;
        case PhantomKind::point_delta:
            for (int a = 0; a < 2; ++a) lo[a] = hi[a] = p.point[a];
            break;
        case PhantomKind::segment_delta:
            for (int a = 0; a < 2; ++a) {
                lo[a] = std::min(p.seg_a[a], p.seg_b[a]);
                hi[a] = std::max(p.seg_a[a], p.seg_b[a]);
            }
            break;
    }
}

inline void convolve_with_kernel(SampledField& field, const DiscreteKernel& k) {
    const GridSpec& g = field.grid;
    const long n0 = static_cast<long>(g.shape[0]);
    const long n1 = static_cast<long>(g.shape[1]);
    std::vector<double> out(field.values.size(), 0.0);
    const double cv = g.cell_volume();
    for (long i = 0; i < n0; ++i) {
        for (long j = 0; j < n1; ++j) {
            const double v = field.values[static_cast<std::size_t>(i * n1 + j)];
            if (v == 0.0) continue;
            for (long di = -k.rad0; di <= k.rad0; ++di) {
                const long ii = i + di;
                if (ii < 0 || ii >= n0) continue;
                for (long dj = -k.rad1; dj <= k.rad1; ++dj) {
                    const long jj = j + dj;
                    if (jj < 0 || jj >= n1) continue;
                    out[static_cast<std::size_t>(ii * n1 + jj)] +=
                        v * k.weights[k.flat(di, dj)] * cv;
                }
            }
        }
    }
    field.values = std::move(out);
}

} // namespace detail

// Rasterize a phantom onto a grid.  Deltas require sigma > 0; indicator
// edges are anti-aliased; mollification preserves compact support.
inline SampledField rasterize(const PhantomSpec& phantom, const GridSpec& grid,
                              const Mollification& moll) {
    phantom.validate();
    grid.validate();
    if (grid.dim() != 2) throw validation_error("rasterize: grid must be 2-D");
    if (moll.sigma < 0.0) throw validation_error("rasterize: sigma must be >= 0");
    const bool is_delta = phantom.kind == PhantomKind::point_delta ||
                          phantom.kind == PhantomKind::segment_delta;
    if (is_delta && moll.sigma == 0.0)
        throw validation_error("rasterize: delta phantoms require sigma > 0");

    // Margin precondition: geometry inflated by 3*sigma must leave at
    // least 4 cells of guaranteed-zero boundary per side.
    double lo[2], hi[2];
    detail::geometry_box(phantom, lo, hi);
    const bool has_edge = phantom.kind == PhantomKind::disk_indicator ||
                          phantom.kind == PhantomKind::half_plane_indicator;
    // Anti-aliased indicator edges extend a few cells past the geometry.
    const double edge_pad = has_edge ? 5.0 * std::numbers::sqrt2 * 1.5 *
                                           std::min(grid.spacing[0], grid.spacing[1])
                                     : 0.0;
    for (int a = 0; a < 2; ++a) {
        const double pad = 3.0 * moll.sigma + edge_pad + 4.0 * grid.spacing[a];
        if (lo[a] - pad < grid.origin[a] || hi[a] + pad > grid.upper(a)) {
            throw validation_error(
                "rasterize: phantom extent [" + std::to_string(lo[a] - 3.0 * moll.sigma) +
                ", " + std::to_string(hi[a] + 3.0 * moll.sigma) + "] on axis " +
                std::to_string(a) + " overflows the 4-cell support margin");
        }
    }

    SampledField field;
    field.grid = grid;
    field.values.assign(grid.cell_count(), 0.0);
    const index_t n1 = grid.shape[1];

    auto for_each_cell = [&](auto&& fn) {
        for (index_t i = 0; i < grid.shape[0]; ++i) {
            const double x0 = grid.coord(0, i);
            for (index_t j = 0; j < n1; ++j) {
                field.values[i * n1 + j] = fn(x0, grid.coord(1, j));
            }
        }
    };

    // Anti-aliased edge coverage from the signed distance to the boundary
    // (positive outside): an erf profile about 1.5 cells wide.  A sampled or
    // quantized indicator leaves pixel-scale steps along oblique edges whose
    // beyond-Nyquist spectrum folds back at arbitrary angles; the erf profile
    // pushes that folded energy below 1e-4 of the edge signal while keeping
    // the jump signature across the edge.
    const double sigma_e = 1.5 * std::min(grid.spacing[0], grid.spacing[1]);
    auto coverage = [sigma_e](double signed_dist) {
        const double z = signed_dist / (sigma_e * std::numbers::sqrt2);
        if (z >= 5.0) return 0.0;
        if (z <= -5.0) return 1.0;
        return 0.5 * std::erfc(z);
    };

    switch (phantom.kind) {
        case PhantomKind::bump:
            for_each_cell([&](double x, double y) {
                const double dx = x - phantom.center[0], dy = y - phantom.center[1];
                return phantom.amplitude *
                       detail::bump_profile(std::sqrt(dx * dx + dy * dy) / phantom.radius);
            });
            break;
        case PhantomKind::disk_indicator:
            for_each_cell([&](double x, double y) {
                const double dx = x - phantom.center[0], dy = y - phantom.center[1];
                return phantom.amplitude *
                       coverage(std::sqrt(dx * dx + dy * dy) - phantom.radius);
            });
            break;
        case PhantomKind::half_plane_indicator: {
            const Direction n = Direction::normalized(phantom.normal);
            for_each_cell([&](double x, double y) {
                const double ind = coverage(x * n[0] + y * n[1] - phantom.offset);
                const double dx = x - phantom.cutoff_center[0];
                const double dy = y - phantom.cutoff_center[1];
                return phantom.amplitude * ind *
                       detail::plateau_profile(std::sqrt(dx * dx + dy * dy) /
                                               phantom.cutoff_radius);
            });
            break;
        }
        case PhantomKind::point_delta: {
            const auto k = detail::DiscreteKernel::build(grid, moll.sigma);
            // Deposit on the kernel lattice around the nearest node so the
            // discrete mass stays exactly amplitude.
            const long ic = static_cast<long>(
                std::lround((phantom.point[0] - grid.origin[0]) / grid.spacing[0]));
            const long jc = static_cast<long>(
                std::lround((phantom.point[1] - grid.origin[1]) / grid.spacing[1]));
            for (long di = -k.rad0; di <= k.rad0; ++di) {
                for (long dj = -k.rad1; dj <= k.rad1; ++dj) {
                    const long i = ic + di, j = jc + dj;
                    field.values[static_cast<index_t>(i) * n1 + static_cast<index_t>(j)] =
                        phantom.amplitude * k.weights[k.flat(di, dj)];
                }
            }
            break;
        }
        case PhantomKind::segment_delta: {
            const auto k = detail::DiscreteKernel::build(grid, moll.sigma);
            const double len = distance(phantom.seg_a, phantom.seg_b);
            const double dl = grid.min_spacing() / 4.0;
            const auto steps = static_cast<index_t>(std::ceil(len / dl));
            SampledField line;
            line.grid = grid;
            line.values.assign(grid.cell_count(), 0.0);
            // Accumulate the line measure on nearest nodes, then mollify.
            for (index_t s = 0; s <= steps; ++s) {
                const double t = static_cast<double>(s) / static_cast<double>(steps);
                const double w = (s == 0 || s == steps) ? 0.5 : 1.0; // trapezoid
                const double px = phantom.seg_a[0] + t * (phantom.seg_b[0] - phantom.seg_a[0]);
                const double py = phantom.seg_a[1] + t * (phantom.seg_b[1] - phantom.seg_a[1]);
                const auto i = static_cast<index_t>(
                    std::lround((px - grid.origin[0]) / grid.spacing[0]));
                const auto j = static_cast<index_t>(
                    std::lround((py - grid.origin[1]) / grid.spacing[1]));
                line.values[i * n1 + j] +=
                    phantom.amplitude * w * len / static_cast<double>(steps) /
                    grid.cell_volume();
            }
            detail::convolve_with_kernel(line, k);
            field.values = std::move(line.values);
            break;
        }
    }

    if (moll.sigma > 0.0 && !is_delta) {
        detail::convolve_with_kernel(field, detail::DiscreteKernel::build(grid, moll.sigma));
    }

    // Record the realized margin.
    if (field.max_abs() > 0.0) {
        std::vector<index_t> blo, bhi;
        field.nonzero_box(blo, bhi);
        index_t margin = std::numeric_limits<index_t>::max();
        for (int a = 0; a < 2; ++a) {
            margin = std::min(margin, blo[a]);
            margin = std::min(margin, grid.shape[a] - 1 - bhi[a]);
        }
        field.support_margin = margin;
    } else {
        field.support_margin = std::min(grid.shape[0], grid.shape[1]) / 2;
    }
    field.validate();
    return field;
}

namespace detail {

inline const Direction& snap_direction(const std::vector<Direction>& dirs,
                                       const Direction& d) {
    index_t best = 0;
    double best_a = 1e300;
    for (index_t i = 0; i < dirs.size(); ++i) {
        const double a = angle_between(dirs[i], d);
        if (a < best_a) {
            best_a = a;
            best = i;
        }
    }
    return dirs[best];
}

} // namespace detail

// Discretized exact wavefront set of a phantom, snapped to the position
// lattice and direction set.  Standard microlocal facts serve as oracle:
// bump -> empty; point mass -> point x all directions; indicator of a
// smooth region -> boundary x normals; segment measure -> interior x
// normals plus endpoints x all directions.
inline WavefrontSet exact_wavefront(const PhantomSpec& phantom, index_t direction_count,
                                    const GridSpec& position_grid) {
    phantom.validate();
    position_grid.validate();
    const auto dirs = discretize_directions(direction_count);
    WavefrontSet wf;
    wf.position_grid = position_grid;
    wf.direction_count = direction_count;
    if (phantom.amplitude == 0.0) return wf;

    auto add = [&](std::vector<double> x, const Direction& theta) {
        for (const auto& s : wf.samples) {
            if (s.x == x && s.theta.components == theta.components) return;
        }
        PhaseSpaceSample s;
        s.x = std::move(x);
        s.theta = theta;
        s.decay_order = 0.0;
        s.log_constant = 0.0;
        s.singular = true;
        wf.samples.push_back(std::move(s));
    };

    const double tol = std::max(position_grid.spacing[0], position_grid.spacing[1]);

    auto for_each_lattice = [&](auto&& fn) {
        for (index_t i = 0; i < position_grid.shape[0]; ++i) {
            for (index_t j = 0; j < position_grid.shape[1]; ++j) {
                fn(position_grid.coord(0, i), position_grid.coord(1, j));
            }
        }
    };

    switch (phantom.kind) {
        case PhantomKind::bump:
            break; // smooth: empty wavefront set
        case PhantomKind::point_delta: {
            // Snap the location to the lattice.
            double best = 1e300;
            std::vector<double> bx;
            for_each_lattice([&](double x, double y) {
                const double d = distance(std::vector<double>{x, y}, phantom.point);
                if (d < best) {
                    best = d;
                    bx = {x, y};
                }
            });
            for (const auto& d : dirs) add(bx, d);
            break;
        }
        case PhantomKind::disk_indicator:
            for_each_lattice([&](double x, double y) {
                const double dx = x - phantom.center[0], dy = y - phantom.center[1];
                const double r = std::sqrt(dx * dx + dy * dy);
                if (std::abs(r - phantom.radius) > tol || r == 0.0) return;
                const Direction out = Direction::normalized({dx, dy});
                add({x, y}, detail::snap_direction(dirs, out));
                add({x, y}, detail::snap_direction(dirs, out.negated()));
            });
            break;
        case PhantomKind::half_plane_indicator: {
            const Direction n = Direction::normalized(phantom.normal);
            for_each_lattice([&](double x, double y) {
                const double s = x * n[0] + y * n[1] - phantom.offset;
                const double cx = x - phantom.cutoff_center[0];
                const double cy = y - phantom.cutoff_center[1];
                if (std::abs(s) > tol) return;
                if (std::sqrt(cx * cx + cy * cy) > phantom.cutoff_radius) return;
                add({x, y}, detail::snap_direction(dirs, n));
                add({x, y}, detail::snap_direction(dirs, n.negated()));
            });
            break;
        }
        case PhantomKind::segment_delta: {
            const double ux = phantom.seg_b[0] - phantom.seg_a[0];
            const double uy = phantom.seg_b[1] - phantom.seg_a[1];
            const double len = std::sqrt(ux * ux + uy * uy);
            const Direction normal = Direction::normalized({-uy, ux});
            for_each_lattice([&](double x, double y) {
                const double rx = x - phantom.seg_a[0], ry = y - phantom.seg_a[1];
                const double t = (rx * ux + ry * uy) / (len * len);
                const double d_perp = std::abs(rx * (-uy / len) + ry * (ux / len));
                const double d_a = distance(std::vector<double>{x, y}, phantom.seg_a);
                const double d_b = distance(std::vector<double>{x, y}, phantom.seg_b);
                if (d_a <= tol || d_b <= tol) {
                    for (const auto& d : dirs) add({x, y}, d);
                } else if (t > 0.0 && t < 1.0 && d_perp <= tol) {
                    add({x, y}, detail::snap_direction(dirs, normal));
                    add({x, y}, detail::snap_direction(dirs, normal.negated()));
                }
            });
            break;
        }
    }
    return wf;
}

// PhantomSpec JSON: {"kind":"disk_indicator","center":[0,0],"radius":1.0,
// "amplitude":1.0,"sigma":0.0}; analogous fields per kind.
inline std::pair<PhantomSpec, Mollification> parse_phantom_json(const nlohmann::json& j) {
    PhantomSpec p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "bump") p.kind = PhantomKind::bump;
    else if (kind == "disk_indicator") p.kind = PhantomKind::disk_indicator;
    else if (kind == "half_plane_indicator") p.kind = PhantomKind::half_plane_indicator;
    else if (kind == "point_delta") p.kind = PhantomKind::point_delta;
    else if (kind == "segment_delta") p.kind = PhantomKind::segment_delta;
    else throw validation_error("phantom json: unknown kind " + kind);

    if (j.contains("center")) p.center = j["center"].get<std::vector<double>>();
    if (j.contains("radius")) p.radius = j["radius"].get<double>();
    if (j.contains("normal")) p.normal = j["normal"].get<std::vector<double>>();
    if (j.contains("offset")) p.offset = j["offset"].get<double>();
    if (j.contains("cutoff_center"))
        p.cutoff_center = j["cutoff_center"].get<std::vector<double>>();
    if (j.contains("cutoff_radius")) p.cutoff_radius = j["cutoff_radius"].get<double>();
    if (j.contains("point")) p.point = j["point"].get<std::vector<double>>();
    if (j.contains("a")) p.seg_a = j["a"].get<std::vector<double>>();
    if (j.contains("b")) p.seg_b = j["b"].get<std::vector<double>>();
    if (j.contains("amplitude")) p.amplitude = j["amplitude"].get<double>();
    Mollification m;
    if (j.contains("sigma")) m.sigma = j["sigma"].get<double>();
    p.validate();
    return {p, m};
}

} // namespace mlprop

#endif
