#ifndef MLPROP_ANTIDERIVATIVE_HPP
#define MLPROP_ANTIDERIVATIVE_HPP

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mlprop/errors.hpp"
#include "mlprop/fft.hpp"
#include "mlprop/grid.hpp"

namespace mlprop {

// Hyperplane data for the odd symmetrization: support slab [t_min, t_max]
// along v and the mirror plane offset t0 > t_max.
struct SupportBound {
    double t_min = 0.0;
    double t_max = 0.0;
    double t0 = 0.0;
};

// Adaptive quadrature with an absolute tolerance target.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-9) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), a, b, 15, tol, &err);
    if (!(err < std::max(1e3 * tol, 1e-10 * std::abs(val)) + 1e-12))
        throw numeric_error("quadrature non-convergence, achieved error " +
                            std::to_string(err));
    return val;
}

// Smallest x.v over the support, minus half a cell diagonal (conservative).
inline double tmin(const SampledField& field, const Direction& v) {
    std::vector<index_t> lo, hi;
    field.nonzero_box(lo, hi); // throws "empty support" on zero fields
    const index_t n = field.grid.dim();
    std::vector<index_t> idx(n);
    std::vector<double> x(n);
    double best = std::numeric_limits<double>::infinity();
    for (index_t f = 0; f < field.values.size(); ++f) {
        if (field.values[f] == 0.0) continue;
        field.grid.unflatten(f, idx);
        field.grid.coord(idx, x);
        best = std::min(best, v.dot(x));
    }
    return best - 0.5 * field.grid.cell_diagonal();
}

inline double tmax(const SampledField& field, const Direction& v) {
    const index_t n = field.grid.dim();
    std::vector<index_t> idx(n);
    std::vector<double> x(n);
    double best = -std::numeric_limits<double>::infinity();
    for (index_t f = 0; f < field.values.size(); ++f) {
        if (field.values[f] == 0.0) continue;
        field.grid.unflatten(f, idx);
        field.grid.coord(idx, x);
        best = std::max(best, v.dot(x));
    }
    if (!std::isfinite(best)) throw validation_error("field: empty support");
    return best + 0.5 * field.grid.cell_diagonal();
}

namespace detail {

// Axis-aligned direction test: v = sign * e_axis within 1e-9.
inline bool axis_direction(const Direction& v, index_t& axis, int& sign) {
    for (index_t a = 0; a < v.dim(); ++a) {
        if (std::abs(std::abs(v[a]) - 1.0) < 1e-9) {
            axis = a;
            sign = v[a] > 0 ? 1 : -1;
            bool rest_zero = true;
            for (index_t b = 0; b < v.dim(); ++b)
                if (b != a && std::abs(v[b]) > 1e-9) rest_zero = false;
            if (rest_zero) return true;
        }
    }
    return false;
}

inline index_t next_pow2(index_t n) {
    index_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Reverse a field along one axis; coordinates are negated on that axis so
// the +axis operators apply to the flipped data.
inline SampledField flip_axis(const SampledField& field, index_t axis) {
    SampledField out;
    out.grid = field.grid;
    out.grid.origin[axis] = -field.grid.upper(axis);
    out.support_margin = field.support_margin;
    out.values.resize(field.values.size());
    const index_t n = field.grid.dim();
    std::vector<index_t> idx(n);
    for (index_t f = 0; f < field.values.size(); ++f) {
        field.grid.unflatten(f, idx);
        idx[axis] = field.grid.shape[axis] - 1 - idx[axis];
        out.values[out.grid.flat_index(idx)] = field.values[f];
    }
    return out;
}

} // namespace detail

// Default symmetrization bound: t0 = t_max + max(8 cells, 10% of support
// width), snapped up to the lattice along the axis of v.
inline SupportBound compute_support_bound(const SampledField& field, const Direction& v) {
    SupportBound b;
    b.t_min = tmin(field, v);
    b.t_max = tmax(field, v);
    index_t axis = 0;
    int sign = 1;
    if (detail::axis_direction(v, axis, sign)) {
        const double h = field.grid.spacing[axis];
        const double orig =
            sign > 0 ? field.grid.origin[axis] : -field.grid.upper(axis);
        const double raw = b.t_max + std::max(8.0 * h, 0.1 * (b.t_max - b.t_min));
        b.t0 = orig + std::ceil((raw - orig) / h - 1e-9) * h;
    } else {
        const double h = field.grid.min_spacing();
        const double raw = b.t_max + std::max(8.0 * h, 0.1 * (b.t_max - b.t_min));
        b.t0 = raw;
    }
    return b;
}

namespace detail {

// Odd reflection across {x_axis = t0} for v = +e_axis, on a grid extended
// along the axis to the next power of two covering the mirror image.
inline SampledField odd_symmetrize_axis(const SampledField& field, index_t axis,
                                        const SupportBound& bound) {
    const double h = field.grid.spacing[axis];
    const double orig = field.grid.origin[axis];
    if (!(bound.t0 > bound.t_max))
        throw validation_error("odd_symmetrize: t0 must exceed t_max");
    const double m0_real = (bound.t0 - orig) / h;
    const auto m0 = static_cast<long>(std::lround(m0_real));
    if (std::abs(m0_real - static_cast<double>(m0)) > 1e-9)
        throw validation_error("odd_symmetrize: 2*t0 off-lattice; snap t0 first");
    const long m = 2 * m0; // reflection: j -> m - j

    SampledField out;
    out.grid = field.grid;
    out.grid.shape[axis] = next_pow2(std::max<index_t>(
        2 * field.grid.shape[axis], static_cast<index_t>(m) + 2));
    out.support_margin = 0;
    out.values.assign(out.grid.cell_count(), 0.0);

    const index_t n = field.grid.dim();
    std::vector<index_t> idx(n);
    for (index_t f = 0; f < field.values.size(); ++f) {
        const double val = field.values[f];
        if (val == 0.0) continue;
        field.grid.unflatten(f, idx);
        const long j = static_cast<long>(idx[axis]);
        out.values[out.grid.flat_index(idx)] += val;
        const long jr = m - j;
        if (jr >= 0 && jr < static_cast<long>(out.grid.shape[axis])) {
            idx[axis] = static_cast<index_t>(jr);
            out.values[out.grid.flat_index(idx)] -= val;
        } else {
            throw validation_error("odd_symmetrize: mirror image exceeds extended grid");
        }
    }
    return out;
}

// Spectral antiderivative along +e_axis on the odd-symmetrized grid.
// Divides the axis DFT by i*tau away from tau = 0; the tau = 0 slice is
// -(transform of (x_axis - t0) * w_star) there, which is its limit value.
inline SampledField spectral_antiderivative_extended(const SampledField& wstar,
                                                     index_t axis, double t0) {
    const GridSpec& g = wstar.grid;
    const double h = g.spacing[axis];
    const index_t M = g.shape[axis];

    std::vector<cplx> data(wstar.values.size());
    for (index_t f = 0; f < data.size(); ++f) data[f] = wstar.values[f];

    // Per-line tau = 0 value, computed in the spatial domain.
    index_t stride = 1;
    for (index_t a = g.dim(); a-- > axis + 1;) stride *= g.shape[a];
    const index_t block = stride * M;
    const index_t outer = data.size() / block;
    std::vector<double> dc(outer * stride, 0.0);
    for (index_t o = 0; o < outer; ++o) {
        for (index_t s = 0; s < stride; ++s) {
            double acc = 0.0;
            for (index_t j = 0; j < M; ++j) {
                const double t = g.coord(axis, j);
                acc += wstar.values[o * block + s + j * stride] * (t - t0);
            }
            dc[o * stride + s] = -acc;
        }
    }

    dft_axis(data, g.shape, axis, false);

    for (index_t o = 0; o < outer; ++o) {
        for (index_t s = 0; s < stride; ++s) {
            const index_t base = o * block + s;
            data[base] = dc[o * stride + s]; // k = 0
            for (index_t k = 1; k < M; ++k) {
                const double tau = 2.0 * M_PI * static_cast<double>(signed_bin(k, M)) /
                                   (static_cast<double>(M) * h);
                data[base + k * stride] /= cplx(0.0, tau);
            }
        }
    }

    dft_axis(data, g.shape, axis, true);

    SampledField out;
    out.grid = g;
    out.support_margin = 0;
    out.values.resize(data.size());
    for (index_t f = 0; f < data.size(); ++f) out.values[f] = data[f].real();
    return out;
}

// Spectral directional derivative along +e_axis (periodic on the grid).
inline SampledField spectral_derivative_axis(const SampledField& field, index_t axis) {
    const GridSpec& g = field.grid;
    const double h = g.spacing[axis];
    const index_t M = g.shape[axis];
    std::vector<cplx> data(field.values.size());
    for (index_t f = 0; f < data.size(); ++f) data[f] = field.values[f];
    dft_axis(data, g.shape, axis, false);
    index_t stride = 1;
    for (index_t a = g.dim(); a-- > axis + 1;) stride *= g.shape[a];
    const index_t block = stride * M;
    const index_t outer = data.size() / block;
    for (index_t o = 0; o < outer; ++o) {
        for (index_t s = 0; s < stride; ++s) {
            const index_t base = o * block + s;
            for (index_t k = 0; k < M; ++k) {
                long sb = signed_bin(k, M);
                if (2 * k == M) sb = 0; // zero the unpaired Nyquist mode
                const double tau = 2.0 * M_PI * static_cast<double>(sb) /
                                   (static_cast<double>(M) * h);
                data[base + k * stride] *= cplx(0.0, tau);
            }
        }
    }
    dft_axis(data, g.shape, axis, true);
    SampledField out;
    out.grid = g;
    out.support_margin = 0;
    out.values.resize(data.size());
    for (index_t f = 0; f < data.size(); ++f) out.values[f] = data[f].real();
    return out;
}

// Restrict an extended-axis field back to the original grid.  Nodes at or
// beyond t0 (where the mirror half begins) take the constant downstream
// value from the last node before t0.
inline SampledField restrict_to_original(const SampledField& ext, const GridSpec& grid,
                                         index_t axis, double t0) {
    SampledField out;
    out.grid = grid;
    out.support_margin = 0;
    out.values.assign(grid.cell_count(), 0.0);
    const index_t n = grid.dim();
    std::vector<index_t> idx(n);
    const double h = grid.spacing[axis];
    const auto jcap = static_cast<long>(
        std::floor((t0 - grid.origin[axis]) / h - 1e-9));
    for (index_t f = 0; f < out.values.size(); ++f) {
        grid.unflatten(f, idx);
        const long j = static_cast<long>(idx[axis]);
        idx[axis] = static_cast<index_t>(std::min(j, jcap));
        out.values[f] = ext.values[ext.grid.flat_index(idx)];
    }
    return out;
}

// Rotation resampling (n = 2): sample(y) = field(R(theta) y).
inline SampledField rotate_resample(const SampledField& field, double c, double s,
                                    const GridSpec& out_grid) {
    SampledField out;
    out.grid = out_grid;
    out.support_margin = 0;
    out.values.assign(out_grid.cell_count(), 0.0);
    for (index_t i = 0; i < out_grid.shape[0]; ++i) {
        const double y0 = out_grid.coord(0, i);
        for (index_t j = 0; j < out_grid.shape[1]; ++j) {
            const double y1 = out_grid.coord(1, j);
            const double p[2] = {c * y0 - s * y1, s * y0 + c * y1};
            out.values[i * out_grid.shape[1] + j] = field.interpolate(p);
        }
    }
    return out;
}

// Grid with uniform spacing h covering the rotation by angle -theta of
// another grid's bounding box, padded by a couple of cells.
inline GridSpec rotated_cover_grid(const GridSpec& g, double c, double s, double h) {
    double lo0 = 1e300, lo1 = 1e300, hi0 = -1e300, hi1 = -1e300;
    for (int ci = 0; ci < 2; ++ci) {
        for (int cj = 0; cj < 2; ++cj) {
            const double x0 = ci ? g.upper(0) : g.origin[0];
            const double x1 = cj ? g.upper(1) : g.origin[1];
            // inverse rotation: R(-theta) x
            const double y0 = c * x0 + s * x1;
            const double y1 = -s * x0 + c * x1;
            lo0 = std::min(lo0, y0);
            hi0 = std::max(hi0, y0);
            lo1 = std::min(lo1, y1);
            hi1 = std::max(hi1, y1);
        }
    }
    GridSpec out;
    out.spacing = {h, h};
    out.origin = {lo0 - 2.0 * h, lo1 - 2.0 * h};
    out.shape = {static_cast<index_t>(std::ceil((hi0 - lo0) / h)) + 5,
                 static_cast<index_t>(std::ceil((hi1 - lo1) / h)) + 5};
    return out;
}

} // namespace detail

// Odd reflection of the field across the hyperplane {x.v = t0} beyond its
// support; requires v axis-aligned and t0 on the lattice.
inline SampledField odd_symmetrize(const SampledField& field, const Direction& v,
                                   const SupportBound& bound) {
    index_t axis = 0;
    int sign = 1;
    if (!detail::axis_direction(v, axis, sign))
        throw validation_error("odd_symmetrize: direction must be axis-aligned");
    if (sign > 0) return detail::odd_symmetrize_axis(field, axis, bound);
    return detail::odd_symmetrize_axis(detail::flip_axis(field, axis), axis, bound);
}

// Directional antiderivative via the odd symmetrization and Fourier
// division, restricted to {x.v < t0} on the original grid.  Directions off
// the axes are handled by rotation resampling (n = 2).
inline SampledField spectral_antiderivative(
    const SampledField& field, const Direction& v,
    std::optional<SupportBound> bound = std::nullopt) {
    index_t axis = 0;
    int sign = 1;
    if (detail::axis_direction(v, axis, sign)) {
        const SampledField* src = &field;
        SampledField flipped;
        if (sign < 0) {
            flipped = detail::flip_axis(field, axis);
            src = &flipped;
        }
        const SupportBound b =
            bound ? *bound
                  : compute_support_bound(
                        *src, Direction::normalized(
                                  [&] {
                                      std::vector<double> c(field.grid.dim(), 0.0);
                                      c[axis] = 1.0;
                                      return c;
                                  }()));
        SampledField ws = detail::odd_symmetrize_axis(*src, axis, b);
        SampledField ext = detail::spectral_antiderivative_extended(ws, axis, b.t0);
        SampledField res = detail::restrict_to_original(ext, src->grid, axis, b.t0);
        if (sign < 0) res = detail::flip_axis(res, axis);
        return res;
    }

    if (field.grid.dim() != 2)
        throw validation_error("spectral_antiderivative: off-axis directions need n = 2");
    // g(y) = f(R y) with R mapping e0 to v; integrate along e0; rotate back.
    const double c = v[0], s = v[1];
    const double h = field.grid.min_spacing();
    const GridSpec rg = detail::rotated_cover_grid(field.grid, c, s, h);
    SampledField g = detail::rotate_resample(field, c, s, rg);
    const Direction e0 = Direction::normalized({1.0, 0.0});
    SupportBound b = bound ? *bound : compute_support_bound(g, e0);
    // re-snap t0 onto the rotated lattice
    b.t0 = rg.origin[0] + std::ceil((b.t0 - rg.origin[0]) / h - 1e-9) * h;
    SampledField ws = detail::odd_symmetrize_axis(g, 0, b);
    SampledField ext = detail::spectral_antiderivative_extended(ws, 0, b.t0);
    SampledField gres = detail::restrict_to_original(ext, rg, 0, b.t0);
    // back-rotation: out(x) = gres(R^{-1} x) = rotate_resample with -theta
    return detail::rotate_resample(gres, c, -s, field.grid);
}

// Spectral directional derivative (axis-aligned v).
inline SampledField spectral_derivative(const SampledField& field, const Direction& v) {
    index_t axis = 0;
    int sign = 1;
    if (!detail::axis_direction(v, axis, sign))
        throw validation_error("spectral_derivative: direction must be axis-aligned");
    SampledField out = detail::spectral_derivative_axis(field, axis);
    if (sign < 0)
        for (double& x : out.values) x = -x;
    return out;
}

// Cumulative quadrature realization: for each output node, composite
// trapezoid along the upstream ray {x - t v : t >= 0} until it leaves the
// field's bounding box, step = min spacing, multilinear interpolation.
inline SampledField cumulative_antiderivative(const SampledField& field, const Direction& v,
                                              const GridSpec& output_grid) {
    const index_t n = field.grid.dim();
    if (v.dim() != n || output_grid.dim() != n)
        throw validation_error("cumulative_antiderivative: dimension mismatch");

    SampledField out;
    out.grid = output_grid;
    out.support_margin = 0;
    out.values.assign(output_grid.cell_count(), 0.0);

    index_t axis = 0;
    int sign = 1;
    if (detail::axis_direction(v, axis, sign) && output_grid == field.grid) {
        // Exact fast path: prefix trapezoid along the axis (identical
        // quadrature, the ray samples land on lattice nodes).
        const double h = field.grid.spacing[axis];
        index_t stride = 1;
        for (index_t a = n; a-- > axis + 1;) stride *= field.grid.shape[a];
        const index_t len = field.grid.shape[axis];
        const index_t block = stride * len;
        const index_t outer = field.values.size() / block;
        for (index_t o = 0; o < outer; ++o) {
            for (index_t s = 0; s < stride; ++s) {
                const index_t base = o * block + s;
                double acc = 0.0;
                if (sign > 0) {
                    double prev = 0.0;
                    for (index_t j = 0; j < len; ++j) {
                        const double cur = field.values[base + j * stride];
                        acc += 0.5 * h * (prev + cur);
                        out.values[base + j * stride] = acc;
                        prev = cur;
                    }
                } else {
                    double prev = 0.0;
                    for (index_t j = len; j-- > 0;) {
                        const double cur = field.values[base + j * stride];
                        acc += 0.5 * h * (prev + cur);
                        out.values[base + j * stride] = acc;
                        prev = cur;
                    }
                }
            }
        }
        return out;
    }

    const double dt = field.grid.min_spacing();
    std::vector<index_t> idx(n);
    std::vector<double> x(n), p(n);
    for (index_t f = 0; f < out.values.size(); ++f) {
        output_grid.unflatten(f, idx);
        output_grid.coord(idx, x);
        // Longest stay of x - t v inside the field box.
        double t_exit = 0.0;
        bool ever_inside = true;
        for (index_t a = 0; a < n; ++a) {
            const double lo = field.grid.origin[a] - field.grid.spacing[a];
            const double hi = field.grid.upper(a) + field.grid.spacing[a];
            if (std::abs(v[a]) < 1e-15) {
                if (x[a] < lo || x[a] > hi) ever_inside = false;
                continue;
            }
            // x[a] - t v[a] in [lo, hi]
            const double t1 = (x[a] - lo) / v[a];
            const double t2 = (x[a] - hi) / v[a];
            t_exit = std::max(t_exit, std::max(t1, t2));
        }
        if (!ever_inside || t_exit <= 0.0) {
            out.values[f] = 0.0;
            continue;
        }
        const auto steps = static_cast<index_t>(std::ceil(t_exit / dt));
        double acc = 0.0;
        double prev = field.interpolate(x);
        for (index_t k = 1; k <= steps; ++k) {
            const double t = static_cast<double>(k) * dt;
            for (index_t a = 0; a < n; ++a) p[a] = x[a] - t * v[a];
            const double cur = field.interpolate(p);
            acc += 0.5 * dt * (prev + cur);
            prev = cur;
        }
        out.values[f] = acc;
    }
    return out;
}

// X-ray transform restricted to direction v (n = 2): a 1-D field on the
// coordinate u along v-perp = (-v1, v0).
inline SampledField xray_transform(const SampledField& field, const Direction& v) {
    if (field.grid.dim() != 2)
        throw validation_error("xray_transform: field must be 2-D");
    const double px = -v[1], py = v[0]; // v-perp
    double ulo = 1e300, uhi = -1e300, tlo = 1e300, thi = -1e300;
    for (int ci = 0; ci < 2; ++ci) {
        for (int cj = 0; cj < 2; ++cj) {
            const double x0 = ci ? field.grid.upper(0) : field.grid.origin[0];
            const double x1 = cj ? field.grid.upper(1) : field.grid.origin[1];
            const double u = x0 * px + x1 * py;
            const double t = x0 * v[0] + x1 * v[1];
            ulo = std::min(ulo, u);
            uhi = std::max(uhi, u);
            tlo = std::min(tlo, t);
            thi = std::max(thi, t);
        }
    }
    const double h = field.grid.min_spacing();
    SampledField out;
    out.grid.spacing = {h};
    out.grid.origin = {ulo};
    out.grid.shape = {std::max<index_t>(4, static_cast<index_t>(std::ceil((uhi - ulo) / h)) + 1)};
    out.support_margin = 0;
    out.values.assign(out.grid.shape[0], 0.0);
    const auto steps = static_cast<index_t>(std::ceil((thi - tlo) / h));
    for (index_t i = 0; i < out.grid.shape[0]; ++i) {
        const double u = out.grid.coord(0, i);
        double acc = 0.0, prev = 0.0;
        for (index_t k = 0; k <= steps; ++k) {
            const double t = tlo + static_cast<double>(k) * h;
            const double p[2] = {u * px + t * v[0], u * py + t * v[1]};
            const double cur = field.interpolate(p);
            if (k > 0) acc += 0.5 * h * (prev + cur);
            prev = cur;
        }
        out.values[i] = acc;
    }
    return out;
}

// Analytic Schwartz-side data: phi evaluable pointwise with an effective
// support radius, and a unit-mass psi0 supported on [psi0_lo, psi0_hi].
struct TestFunctionSpec {
    std::function<double(double, double)> phi;
    double phi_radius = 1.0; // |phi| below cutoff outside this radius
    std::function<double(double)> psi0;
    double psi0_lo = 0.0;
    double psi0_hi = 0.0;
    double quad_tol = 1e-9;
};

// Compactly supported unit-mass psi0 on [lo, hi] from the bump profile.
inline TestFunctionSpec make_bump_psi0(TestFunctionSpec tf, double lo, double hi) {
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    auto raw = [mid, half](double s) {
        const double z = (s - mid) / half;
        return z * z < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z * z)) : 0.0;
    };
    const double mass = integrate_adaptive(raw, lo, hi, 1e-12);
    tf.psi0 = [raw, mass](double s) { return raw(s) / mass; };
    tf.psi0_lo = lo;
    tf.psi0_hi = hi;
    return tf;
}

// I_v phi(u + t v) = int_{-inf}^t [phi - (X_v phi (x) psi0)](u + s v) ds,
// evaluated by adaptive quadrature at the requested points.
inline std::vector<double> apply_I_to_test_function(
    const TestFunctionSpec& tf, const Direction& v,
    const std::vector<std::array<double, 2>>& eval_points) {
    std::vector<double> out;
    out.reserve(eval_points.size());
    const double R = tf.phi_radius;
    for (const auto& pt : eval_points) {
        const double t = pt[0] * v[0] + pt[1] * v[1];
        const double u0 = pt[0] - t * v[0];
        const double u1 = pt[1] - t * v[1];
        auto phi_line = [&](double s) { return tf.phi(u0 + s * v[0], u1 + s * v[1]); };
        const double u_norm = std::sqrt(u0 * u0 + u1 * u1);
        double xphi = 0.0;
        if (u_norm < R) {
            const double half = std::sqrt(R * R - u_norm * u_norm);
            xphi = integrate_adaptive(phi_line, -half, half, tf.quad_tol);
        }
        const double lower = std::min(-R, tf.psi0_lo) - 1.0;
        auto integrand = [&](double s) { return phi_line(s) - xphi * tf.psi0(s); };
        out.push_back(t <= lower ? 0.0
                                 : integrate_adaptive(integrand, lower, t, tf.quad_tol));
    }
    return out;
}

// L^2 pairing of the grid representation with an analytic function.
inline double dual_pairing(const SampledField& field,
                           const std::function<double(double, double)>& phi) {
    if (field.grid.dim() != 2) throw validation_error("dual_pairing: field must be 2-D");
    const double cv = field.grid.cell_volume();
    double acc = 0.0;
    const index_t n1 = field.grid.shape[1];
    for (index_t i = 0; i < field.grid.shape[0]; ++i) {
        const double x = field.grid.coord(0, i);
        for (index_t j = 0; j < n1; ++j) {
            const double w = field.values[i * n1 + j];
            if (w != 0.0) acc += w * phi(x, field.grid.coord(1, j));
        }
    }
    return acc * cv;
}

inline double dual_pairing(const SampledField& field, const TestFunctionSpec& tf) {
    return dual_pairing(field, tf.phi);
}

// t_min as a smooth function of the scalar coordinate on v-perp.
using ShearFn = std::function<double(double)>;

namespace detail {

inline double perp_coord(const Direction& v, double x0, double x1) {
    return -v[1] * x0 + v[0] * x1;
}

inline double max_abs_shear(const SampledField& field, const Direction& v,
                            const ShearFn& fn) {
    double m = 0.0;
    // sample the perpendicular coordinate range densely
    double ulo = 1e300, uhi = -1e300;
    for (int ci = 0; ci < 2; ++ci) {
        for (int cj = 0; cj < 2; ++cj) {
            const double x0 = ci ? field.grid.upper(0) : field.grid.origin[0];
            const double x1 = cj ? field.grid.upper(1) : field.grid.origin[1];
            const double u = perp_coord(v, x0, x1);
            ulo = std::min(ulo, u);
            uhi = std::max(uhi, u);
        }
    }
    const int samples = 512;
    for (int i = 0; i <= samples; ++i) {
        const double u = ulo + (uhi - ulo) * static_cast<double>(i) / samples;
        m = std::max(m, std::abs(fn(u)));
    }
    return m;
}

inline SampledField shear_apply(const SampledField& field, const Direction& v,
                                const ShearFn& fn, double dir_sign, bool check_support) {
    if (field.grid.dim() != 2) throw validation_error("shear: field must be 2-D");
    if (check_support) {
        // Reject shears that push the support outside the grid.
        std::vector<index_t> blo, bhi;
        field.nonzero_box(blo, bhi);
        const double shift = max_abs_shear(field, v, fn);
        for (int a = 0; a < 2; ++a) {
            const double pad = shift * std::abs(v[a]);
            const double lo = field.grid.coord(a, blo[a]) - pad;
            const double hi = field.grid.coord(a, bhi[a]) + pad;
            if (lo < field.grid.origin[a] || hi > field.grid.upper(a))
                throw validation_error("shear: support pushed outside grid on axis " +
                                       std::to_string(a));
        }
    }
    SampledField out;
    out.grid = field.grid;
    out.support_margin = 0;
    out.values.assign(field.values.size(), 0.0);
    const index_t n1 = field.grid.shape[1];
    for (index_t i = 0; i < field.grid.shape[0]; ++i) {
        const double x0 = field.grid.coord(0, i);
        for (index_t j = 0; j < n1; ++j) {
            const double x1 = field.grid.coord(1, j);
            const double s = dir_sign * fn(perp_coord(v, x0, x1));
            const double p[2] = {x0 + s * v[0], x1 + s * v[1]};
            out.values[i * n1 + j] = field.interpolate(p);
        }
    }
    return out;
}

} // namespace detail

// output(u + t v) = field(u + (t + t_min(u)) v): slides each line along v
// down by t_min(u), bringing the sheared support condition to a constant one.
inline SampledField shear_pullback(const SampledField& field, const Direction& v,
                                   const ShearFn& t_min_fn) {
    return detail::shear_apply(field, v, t_min_fn, +1.0, true);
}

// No support check here: antiderivatives extend to the downstream grid
// edge, so only a band within the shear amplitude of that edge is clipped.
inline SampledField shear_pushforward(const SampledField& field, const Direction& v,
                                      const ShearFn& t_min_fn) {
    return detail::shear_apply(field, v, t_min_fn, -1.0, false);
}

// Antiderivative under the sheared support condition: conjugation of the
// spectral antiderivative with the shear, bound recomputed on the sheared
// field.
inline SampledField antiderivative_general(const SampledField& field, const Direction& v,
                                           const ShearFn& t_min_fn) {
    if (field.max_abs() == 0.0) return field;
    SampledField pulled = shear_pullback(field, v, t_min_fn);
    SampledField anti = spectral_antiderivative(pulled, v);
    return shear_pushforward(anti, v, t_min_fn);
}

// Named shear built-ins: "zero" | "constant:c" | "sine:a,k".
inline ShearFn parse_shear(const std::string& name) {
    if (name == "zero") return [](double) { return 0.0; };
    if (name.rfind("constant:", 0) == 0) {
        const double c = std::stod(name.substr(9));
        return [c](double) { return c; };
    }
    if (name.rfind("sine:", 0) == 0) {
        const std::string rest = name.substr(5);
        const auto comma = rest.find(',');
        if (comma == std::string::npos)
            throw validation_error("shear: sine needs two parameters a,k");
        const double a = std::stod(rest.substr(0, comma));
        const double k = std::stod(rest.substr(comma + 1));
        return [a, k](double u) { return a * std::sin(k * u); };
    }
    throw validation_error("shear: unknown built-in " + name);
}

} // namespace mlprop

#endif
