#ifndef MLPROP_GRID_HPP
#define MLPROP_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlprop/errors.hpp"

namespace mlprop {

using index_t = std::size_t;

// Uniform grid on R^n.  Cell i has physical coordinate origin + i*spacing
// (node convention, row-major flat layout with the last axis fastest).
struct GridSpec {
    std::vector<index_t> shape;
    std::vector<double> spacing;
    std::vector<double> origin;

    index_t dim() const { return shape.size(); }

    index_t cell_count() const {
        index_t n = 1;
        for (index_t s : shape) n *= s;
        return n;
    }

    double cell_volume() const {
        double v = 1.0;
        for (double h : spacing) v *= h;
        return v;
    }

    double min_spacing() const {
        return *std::min_element(spacing.begin(), spacing.end());
    }

    double cell_diagonal() const {
        double d = 0.0;
        for (double h : spacing) d += h * h;
        return std::sqrt(d);
    }

    double coord(index_t axis, index_t i) const {
        return origin[axis] + static_cast<double>(i) * spacing[axis];
    }

    void coord(std::span<const index_t> idx, std::span<double> out) const {
        for (index_t a = 0; a < dim(); ++a) out[a] = coord(a, idx[a]);
    }

    index_t flat_index(std::span<const index_t> idx) const {
        index_t f = 0;
        for (index_t a = 0; a < dim(); ++a) f = f * shape[a] + idx[a];
        return f;
    }

    void unflatten(index_t flat, std::span<index_t> idx) const {
        for (index_t a = dim(); a-- > 0;) {
            idx[a] = flat % shape[a];
            flat /= shape[a];
        }
    }

    // Physical coordinate of the last node along an axis.
    double upper(index_t axis) const {
        return coord(axis, shape[axis] - 1);
    }

    void validate() const {
        if (shape.empty()) throw validation_error("grid: empty shape");
        if (spacing.size() != shape.size() || origin.size() != shape.size())
            throw validation_error("grid: shape/spacing/origin size mismatch");
        for (index_t s : shape)
            if (s < 4) throw validation_error("grid: shape entries must be >= 4");
        for (double h : spacing)
            if (!(h > 0.0)) throw validation_error("grid: spacing entries must be > 0");
        for (double o : origin)
            if (!std::isfinite(o)) throw validation_error("grid: origin must be finite");
    }

    bool operator==(const GridSpec&) const = default;
};

// extent: [lo, hi) per axis; spacing = length / resolution.
inline GridSpec make_grid(const std::vector<std::pair<double, double>>& extent,
                          const std::vector<index_t>& resolution) {
    if (extent.size() != resolution.size() || extent.empty())
        throw validation_error("make_grid: extent/resolution size mismatch");
    GridSpec g;
    for (index_t a = 0; a < extent.size(); ++a) {
        const double len = extent[a].second - extent[a].first;
        if (!(len > 0.0))
            throw validation_error("make_grid: nonpositive extent length on axis " +
                                   std::to_string(a));
        if (resolution[a] < 4)
            throw validation_error("make_grid: resolution must be >= 4 on axis " +
                                   std::to_string(a));
        g.shape.push_back(resolution[a]);
        g.spacing.push_back(len / static_cast<double>(resolution[a]));
        g.origin.push_back(extent[a].first);
    }
    g.validate();
    return g;
}

// Grid samples of a compactly supported real function.  support_margin
// boundary cells per side are guaranteed zero.
struct SampledField {
    GridSpec grid;
    std::vector<double> values;
    index_t support_margin = 0;

    double operator[](index_t flat) const { return values[flat]; }

    void validate() const {
        grid.validate();
        if (values.size() != grid.cell_count())
            throw validation_error("field: value count does not match grid");
        for (double v : values)
            if (!std::isfinite(v)) throw validation_error("field: non-finite value");
        if (support_margin > 0) {
            const index_t n = grid.dim();
            std::vector<index_t> idx(n);
            for (index_t f = 0; f < values.size(); ++f) {
                if (values[f] == 0.0) continue;
                grid.unflatten(f, idx);
                for (index_t a = 0; a < n; ++a) {
                    if (idx[a] < support_margin || idx[a] + support_margin >= grid.shape[a])
                        throw validation_error("field: nonzero value inside support margin");
                }
            }
        }
    }

    // Multilinear interpolation; zero outside the grid.
    double interpolate(std::span<const double> p) const {
        const index_t n = grid.dim();
        // s[a] = fractional index, i0[a] = lower corner
        double s[3];
        std::ptrdiff_t i0[3];
        double w1[3];
        for (index_t a = 0; a < n; ++a) {
            s[a] = (p[a] - grid.origin[a]) / grid.spacing[a];
            i0[a] = static_cast<std::ptrdiff_t>(std::floor(s[a]));
            w1[a] = s[a] - static_cast<double>(i0[a]);
        }
        double acc = 0.0;
        const index_t corners = index_t{1} << n;
        for (index_t c = 0; c < corners; ++c) {
            double wgt = 1.0;
            index_t flat = 0;
            bool inside = true;
            for (index_t a = 0; a < n; ++a) {
                const index_t bit = (c >> a) & 1u;
                const std::ptrdiff_t i = i0[a] + static_cast<std::ptrdiff_t>(bit);
                wgt *= bit ? w1[a] : (1.0 - w1[a]);
                if (i < 0 || i >= static_cast<std::ptrdiff_t>(grid.shape[a])) {
                    inside = false;
                    break;
                }
                flat = flat * grid.shape[a] + static_cast<index_t>(i);
            }
            if (inside && wgt != 0.0) acc += wgt * values[flat];
        }
        return acc;
    }

    // Index bounding box of nonzero cells: [lo, hi] inclusive per axis.
    // Throws on an identically zero field.
    void nonzero_box(std::vector<index_t>& lo, std::vector<index_t>& hi) const {
        const index_t n = grid.dim();
        lo.assign(n, std::numeric_limits<index_t>::max());
        hi.assign(n, 0);
        std::vector<index_t> idx(n);
        bool any = false;
        for (index_t f = 0; f < values.size(); ++f) {
            if (values[f] == 0.0) continue;
            any = true;
            grid.unflatten(f, idx);
            for (index_t a = 0; a < n; ++a) {
                lo[a] = std::min(lo[a], idx[a]);
                hi[a] = std::max(hi[a], idx[a]);
            }
        }
        if (!any) throw validation_error("field: empty support");
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

inline double rel_l2_difference(const SampledField& a, const SampledField& b) {
    if (a.grid.shape != b.grid.shape)
        throw validation_error("rel_l2_difference: shape mismatch");
    double num = 0.0, den = 0.0;
    for (index_t f = 0; f < a.values.size(); ++f) {
        const double d = a.values[f] - b.values[f];
        num += d * d;
        den += b.values[f] * b.values[f];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

// Unit vector on S^{n-1}.
struct Direction {
    std::vector<double> components;

    Direction() = default;
    explicit Direction(std::vector<double> c) : components(std::move(c)) {
        double n2 = 0.0;
        for (double x : components) n2 += x * x;
        if (std::abs(std::sqrt(n2) - 1.0) > 1e-12)
            throw validation_error("direction: not unit norm");
    }

    static Direction normalized(std::vector<double> c) {
        double n2 = 0.0;
        for (double x : c) n2 += x * x;
        const double n = std::sqrt(n2);
        if (!(n > 0.0)) throw validation_error("direction: zero vector");
        for (double& x : c) x /= n;
        return Direction(std::move(c));
    }

    index_t dim() const { return components.size(); }
    double operator[](index_t a) const { return components[a]; }

    double dot(std::span<const double> p) const {
        double d = 0.0;
        for (index_t a = 0; a < components.size(); ++a) d += components[a] * p[a];
        return d;
    }

    Direction negated() const {
        std::vector<double> c = components;
        for (double& x : c) x = -x;
        return Direction(std::move(c));
    }

    // n=2 angle in [0, 2pi).
    double angle() const {
        double a = std::atan2(components[1], components[0]);
        if (a < 0) a += 2.0 * M_PI;
        return a;
    }
};

// Angle between directions, modulo nothing (full angle in [0, pi]).
inline double angle_between(const Direction& a, const Direction& b) {
    double d = 0.0;
    for (index_t i = 0; i < a.dim(); ++i) d += a[i] * b[i];
    d = std::clamp(d, -1.0, 1.0);
    return std::acos(d);
}

// Angle between direction lines (modulo sign), in [0, pi/2].
inline double angle_between_mod_sign(const Direction& a, const Direction& b) {
    double d = 0.0;
    for (index_t i = 0; i < a.dim(); ++i) d += a[i] * b[i];
    d = std::clamp(std::abs(d), 0.0, 1.0);
    return std::acos(d);
}

// Uniform sampling of S^1: (cos 2*pi*k/count, sin 2*pi*k/count).
inline std::vector<Direction> discretize_directions(index_t count) {
    if (count < 8) throw validation_error("discretize_directions: count must be >= 8");
    std::vector<Direction> out;
    out.reserve(count);
    for (index_t k = 0; k < count; ++k) {
        const double a = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(count);
        out.push_back(Direction::normalized({std::cos(a), std::sin(a)}));
    }
    return out;
}

// One phase-space sample (x, theta) with its fitted decay profile.
struct PhaseSpaceSample {
    std::vector<double> x;
    Direction theta;
    double decay_order = 0.0;
    double log_constant = 0.0;
    bool singular = false;
};

// Finite stand-in for WF(.): samples on a coarse position lattice with a
// uniform direction set.
struct WavefrontSet {
    std::vector<PhaseSpaceSample> samples;
    GridSpec position_grid;
    index_t direction_count = 0;

    std::vector<const PhaseSpaceSample*> singular_samples() const {
        std::vector<const PhaseSpaceSample*> out;
        for (const auto& s : samples)
            if (s.singular) out.push_back(&s);
        return out;
    }
};

inline double distance(std::span<const double> a, std::span<const double> b) {
    double d2 = 0.0;
    for (index_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::sqrt(d2);
}

} // namespace mlprop

#endif
