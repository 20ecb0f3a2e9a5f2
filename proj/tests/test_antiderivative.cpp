// Directional antiderivatives: quadrature, symmetrization, spectral
// division, duality, and sheared support bounds.
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mlprop/antiderivative.hpp"
#include "mlprop/fft.hpp"
#include "mlprop/phantom.hpp"

using namespace mlprop;

namespace {

const Direction kE0 = Direction::normalized({1.0, 0.0});
const Direction kE1 = Direction::normalized({0.0, 1.0});

SampledField bump_field(const GridSpec& grid, double cx, double cy, double r,
                        double amp = 1.0) {
    PhantomSpec p;
    p.kind = PhantomKind::bump;
    p.center = {cx, cy};
    p.radius = r;
    p.amplitude = amp;
    return rasterize(p, grid, {});
}

// Sum of a few seeded bumps, kept inside the support margin.
SampledField seeded_bumps(const GridSpec& grid, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> c(-0.7, 0.7), r(0.3, 0.6), a(0.5, 2.0);
    SampledField out;
    out.grid = grid;
    out.values.assign(grid.cell_count(), 0.0);
    for (int b = 0; b < 3; ++b) {
        const SampledField f = bump_field(grid, c(rng), c(rng), r(rng), a(rng));
        for (index_t i = 0; i < f.values.size(); ++i) out.values[i] += f.values[i];
    }
    return out;
}

// Relative L2 difference restricted to nodes with x.v < t0.
double rel_l2_below(const SampledField& a, const SampledField& b, const Direction& v,
                    double t0) {
    double num = 0.0, den = 0.0;
    std::vector<index_t> idx(2);
    std::vector<double> x(2);
    for (index_t f = 0; f < a.values.size(); ++f) {
        a.grid.unflatten(f, idx);
        a.grid.coord(idx, x);
        if (v.dot(x) >= t0) continue;
        const double d = a.values[f] - b.values[f];
        num += d * d;
        den += b.values[f] * b.values[f];
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("adaptive quadrature hits analytic integrals") {
    REQUIRE(integrate_adaptive([](double t) { return std::sin(t); }, 0.0, M_PI) ==
            Catch::Approx(2.0).epsilon(1e-10));
    REQUIRE(integrate_adaptive([](double t) { return std::exp(-t * t); }, -6.0, 6.0) ==
            Catch::Approx(std::sqrt(M_PI)).epsilon(1e-10));
}

TEST_CASE("support bounds bracket the slab of a bump") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {128, 128});
    const SampledField f = bump_field(grid, 0.25, -0.1, 0.5);
    const double lo = tmin(f, kE0), hi = tmax(f, kE0);
    // brackets the continuum slab [-0.25, 0.75] up to one lattice cell
    REQUIRE(lo <= -0.25 + grid.spacing[0] + 1e-9);
    REQUIRE(hi >= 0.75 - grid.spacing[0] - 1e-9);
    REQUIRE(lo >= -0.5);  // not wildly conservative
    REQUIRE(hi <= 1.0);
    const SupportBound b = compute_support_bound(f, kE0);
    REQUIRE(b.t0 > hi);
    // t0 lands on the lattice of axis 0
    const double m = (b.t0 - grid.origin[0]) / grid.spacing[0];
    REQUIRE(std::abs(m - std::round(m)) < 1e-9);
    SampledField zero;
    zero.grid = grid;
    zero.values.assign(grid.cell_count(), 0.0);
    REQUIRE_THROWS_WITH(tmin(zero, kE0), Catch::Matchers::ContainsSubstring("empty support"));
}

TEST_CASE("odd symmetrization is exactly antisymmetric about the mirror plane") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, -0.3, 0.2, 0.5);
    const SupportBound b = compute_support_bound(f, kE0);
    const SampledField ws = odd_symmetrize(f, kE0, b);
    REQUIRE(ws.grid.shape[0] >= 2 * grid.shape[0]);
    REQUIRE(ws.grid.shape[1] == grid.shape[1]);

    const auto m = static_cast<long>(
        2 * std::lround((b.t0 - grid.origin[0]) / grid.spacing[0]));
    double col_sum_max = 0.0;
    for (index_t j = 0; j < ws.grid.shape[1]; ++j) {
        double s = 0.0;
        for (index_t i = 0; i < ws.grid.shape[0]; ++i) {
            const double w = ws.values[i * ws.grid.shape[1] + j];
            s += w;
            const long ir = m - static_cast<long>(i);
            if (ir >= 0 && ir < static_cast<long>(ws.grid.shape[0])) {
                REQUIRE(w == -ws.values[static_cast<index_t>(ir) * ws.grid.shape[1] + j]);
            }
        }
        col_sum_max = std::max(col_sum_max, std::abs(s));
    }
    REQUIRE(col_sum_max <= 1e-12 * f.max_abs() * static_cast<double>(ws.grid.shape[0]));

    SupportBound bad = b;
    bad.t0 = b.t_max - 0.1;
    REQUIRE_THROWS_AS(odd_symmetrize(f, kE0, bad), validation_error);
}

TEST_CASE("the transform of the symmetrized field vanishes on the zero-frequency slice") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, 0.1, 0.0, 0.6);
    const SampledField ws = odd_symmetrize(f, kE0, compute_support_bound(f, kE0));
    std::vector<cplx> data(ws.values.begin(), ws.values.end());
    dft_axis(data, ws.grid.shape, 0, false);
    double max_all = 0.0, max_dc = 0.0;
    for (index_t i = 0; i < ws.grid.shape[0]; ++i)
        for (index_t j = 0; j < ws.grid.shape[1]; ++j) {
            const double mag = std::abs(data[i * ws.grid.shape[1] + j]);
            max_all = std::max(max_all, mag);
            if (i == 0) max_dc = std::max(max_dc, mag);
        }
    REQUIRE(max_dc <= 1e-10 * max_all);
}

TEST_CASE("spectral derivative inverts the spectral antiderivative on the extended grid") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, -0.2, 0.3, 0.55);
    const SupportBound b = compute_support_bound(f, kE0);
    const SampledField ws = odd_symmetrize(f, kE0, b);
    const SampledField anti = detail::spectral_antiderivative_extended(ws, 0, b.t0);
    const SampledField back = spectral_derivative(anti, kE0);
    REQUIRE(rel_l2_difference(back, ws) <= 1e-10);
}

TEST_CASE("spectral and cumulative antiderivatives agree below the mirror plane") {
    for (const Direction& v : {kE0, kE1}) {
        const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {128, 128});
        const SampledField f = seeded_bumps(grid, 11);
        const SupportBound b = compute_support_bound(f, v);
        const SampledField spec = spectral_antiderivative(f, v, b);
        const SampledField cum = cumulative_antiderivative(f, v, grid);
        REQUIRE(rel_l2_below(spec, cum, v, b.t0) <= 1e-3);
    }
}

TEST_CASE("cumulative fast path matches a hand-rolled prefix trapezoid") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, 0.0, 0.0, 0.7);
    const SampledField out = cumulative_antiderivative(f, kE1, grid);
    const double h = grid.spacing[1];
    for (index_t i = 10; i < 54; i += 7) {
        double acc = 0.0;
        for (index_t j = 1; j < 64; ++j) {
            acc += 0.5 * h * (f.values[i * 64 + j - 1] + f.values[i * 64 + j]);
            REQUIRE(out.values[i * 64 + j] == Catch::Approx(acc).margin(1e-14));
        }
    }
}

TEST_CASE("cumulative general path approximates the axis fast path") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {128, 128});
    const SampledField f = bump_field(grid, 0.0, 0.1, 0.6);
    const SampledField fast = cumulative_antiderivative(f, kE0, grid);
    // shrink the output grid by one row to force the general ray-marching path
    GridSpec small = grid;
    small.shape[1] = 127;
    const SampledField slow = cumulative_antiderivative(f, kE0, small);
    double num = 0.0, den = 0.0;
    for (index_t i = 0; i < 128; ++i)
        for (index_t j = 0; j < 127; ++j) {
            const double d = slow.values[i * 127 + j] - fast.values[i * 128 + j];
            num += d * d;
            den += fast.values[i * 128 + j] * fast.values[i * 128 + j];
        }
    REQUIRE(std::sqrt(num / den) <= 1e-2);
}

TEST_CASE("x-ray profile of a disk matches the chord length") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {256, 256});
    PhantomSpec p;
    p.kind = PhantomKind::disk_indicator;
    p.center = {0.0, 0.0};
    p.radius = 0.8;
    const SampledField f = rasterize(p, grid, {});
    const SampledField prof = xray_transform(f, kE1);
    // u = x1 for v = (0, 1): chord length 2 sqrt(r^2 - u^2)
    for (double u : {0.0, 0.3, -0.5}) {
        const double expected = 2.0 * std::sqrt(0.8 * 0.8 - u * u);
        REQUIRE(prof.interpolate(std::vector<double>{-u}) ==
                Catch::Approx(expected).epsilon(0.02));
    }
    REQUIRE(prof.interpolate(std::vector<double>{1.5}) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("dual pairing identity holds against the Schwartz-side operator") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {128, 128});
    const SampledField w = bump_field(grid, 0.0, 0.0, 0.5);
    const SampledField iw = cumulative_antiderivative(w, kE0, grid);

    TestFunctionSpec tf;
    tf.phi = [](double x, double y) {
        const double r2 = (x - 0.4) * (x - 0.4) + y * y;
        return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
    };
    tf.phi_radius = 1.5; // centered at (0.4, 0): covered by |x| < 1.5
    tf = make_bump_psi0(tf, -1.9, -1.2); // upstream of supp w along e0

    const double lhs = dual_pairing(iw, tf);

    std::vector<std::array<double, 2>> pts;
    std::vector<double> wv;
    std::vector<index_t> idx(2);
    std::vector<double> x(2);
    for (index_t f = 0; f < w.values.size(); ++f) {
        if (w.values[f] == 0.0) continue;
        w.grid.unflatten(f, idx);
        w.grid.coord(idx, x);
        pts.push_back({x[0], x[1]});
        wv.push_back(w.values[f]);
    }
    const std::vector<double> iphi = apply_I_to_test_function(tf, kE0, pts);
    double rhs = 0.0;
    for (index_t k = 0; k < wv.size(); ++k) rhs += wv[k] * iphi[k];
    rhs *= -w.grid.cell_volume();

    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-3));

    // invariance under swapping psi0 for another admissible unit-mass bump
    TestFunctionSpec tf2 = tf;
    tf2 = make_bump_psi0(tf2, -1.95, -1.35);
    const std::vector<double> iphi2 = apply_I_to_test_function(tf2, kE0, pts);
    double rhs2 = 0.0;
    for (index_t k = 0; k < wv.size(); ++k) rhs2 += wv[k] * iphi2[k];
    rhs2 *= -w.grid.cell_volume();
    REQUIRE(rhs2 == Catch::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("zero shear reduces the sheared antiderivative to the spectral one") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, -0.2, 0.0, 0.5);
    const SampledField a = antiderivative_general(f, kE0, parse_shear("zero"));
    const SampledField b = spectral_antiderivative(f, kE0);
    REQUIRE(rel_l2_difference(a, b) <= 1e-12);
}

TEST_CASE("smooth shears do not change the antiderivative of a nice function") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {128, 128});
    const SampledField f = bump_field(grid, -0.2, 0.0, 0.5);
    const SampledField sheared =
        antiderivative_general(f, kE0, parse_shear("sine:0.2,1.5"));
    const SampledField plain = spectral_antiderivative(f, kE0);
    // resampling through the shear costs O(h^2)
    double num = 0.0, den = 0.0;
    std::vector<index_t> idx(2);
    std::vector<double> x(2);
    const SupportBound bnd = compute_support_bound(f, kE0);
    for (index_t c = 0; c < plain.values.size(); ++c) {
        plain.grid.unflatten(c, idx);
        plain.grid.coord(idx, x);
        if (x[0] >= bnd.t0 - 0.3) continue; // stay clear of the mirror cap
        const double d = sheared.values[c] - plain.values[c];
        num += d * d;
        den += plain.values[c] * plain.values[c];
    }
    REQUIRE(std::sqrt(num / den) <= 2e-2);

    REQUIRE_THROWS_WITH(antiderivative_general(f, kE0, parse_shear("constant:10")),
                        Catch::Matchers::ContainsSubstring("outside grid"));
}

TEST_CASE("shear parser accepts the built-ins and rejects junk") {
    REQUIRE(parse_shear("zero")(3.0) == 0.0);
    REQUIRE(parse_shear("constant:0.75")(-2.0) == 0.75);
    REQUIRE(parse_shear("sine:0.5,2.0")(0.25) == Catch::Approx(0.5 * std::sin(0.5)));
    REQUIRE_THROWS_AS(parse_shear("cubic:1"), validation_error);
    REQUIRE_THROWS_AS(parse_shear("sine:1"), validation_error);
}
