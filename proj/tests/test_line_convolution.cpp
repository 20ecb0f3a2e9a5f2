// Curves, weights, support horizons, and the two convolution realizations.
#include <catch2/catch_amalgamated.hpp>

#include "mlprop/curve.hpp"
#include "mlprop/phantom.hpp"

using namespace mlprop;

namespace {

SampledField bump_field(const GridSpec& grid, double cx, double cy, double r) {
    PhantomSpec p;
    p.kind = PhantomKind::bump;
    p.center = {cx, cy};
    p.radius = r;
    return rasterize(p, grid, {});
}

CurveSpec ray_curve(double vx, double vy) {
    CurveSpec c;
    c.kind = CurveSpec::Kind::ray;
    const double n = std::sqrt(vx * vx + vy * vy);
    c.v = {vx / n, vy / n};
    return c;
}

CurveSpec arc_curve(double radius = 1.0, double rate = 1.0) {
    CurveSpec c;
    c.kind = CurveSpec::Kind::arc;
    c.radius = radius;
    c.rate = rate;
    return c;
}

} // namespace

TEST_CASE("curve families satisfy the base-point and speed preconditions") {
    for (const CurveSpec& c : {ray_curve(1.0, 0.0), arc_curve(), [] {
                                   CurveSpec s;
                                   s.kind = CurveSpec::Kind::spiral;
                                   s.a = 1.0;
                                   s.b = 0.25;
                                   return s;
                               }()}) {
        REQUIRE_NOTHROW(c.validate(8.0));
        const auto g0 = c.gamma(0.0);
        REQUIRE(std::abs(g0[0]) < 1e-12);
        REQUIRE(std::abs(g0[1]) < 1e-12);
    }
    CurveSpec bad = arc_curve();
    bad.epsilon = -1.0;
    REQUIRE_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("arc curve geometry matches the closed-form circle") {
    const CurveSpec c = arc_curve(2.0, 0.5);
    const auto g = c.gamma(M_PI); // angle pi/2 on the circle of radius 2
    REQUIRE(g[0] == Catch::Approx(2.0));
    REQUIRE(g[1] == Catch::Approx(2.0));
    REQUIRE(c.speed(1.234) == Catch::Approx(1.0)); // radius * rate
}

TEST_CASE("support horizon is found for a ray and refused for a closed circle") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, 0.0, 0.0, 0.5);
    const SupportHorizon h = validate_support_bounded(ray_curve(1.0, 0.0), f, grid, 20.0);
    // gamma(t) = (t, 0) stays inside domain - support until t ~ 2.6
    REQUIRE(h.T > 2.2);
    REQUIRE(h.T < 3.2);

    REQUIRE_THROWS_WITH(
        validate_support_bounded(arc_curve(), f, grid, 20.0),
        Catch::Matchers::ContainsSubstring("support horizon not found below t_probe_max"));
}

TEST_CASE("pairings with analytic test functions match closed forms") {
    TestFunctionSpec tf;
    tf.phi = [](double x, double y) { return std::exp(-(x * x + y * y)); };
    const SupportHorizon h{3.0};
    // ray (1,0): int_0^3 exp(-t^2) dt
    const double got = line_distribution_pairing(ray_curve(1.0, 0.0), WeightSpec::unit(),
                                                 tf, h);
    REQUIRE(got == Catch::Approx(std::sqrt(M_PI) / 2.0 * std::erf(3.0)).epsilon(1e-8));

    // constant phi with arc-length weight on the unit-speed arc: plain length
    TestFunctionSpec one;
    one.phi = [](double, double) { return 1.0; };
    const CurveSpec arc = arc_curve();
    REQUIRE(line_distribution_pairing(arc, arc_length_weight(arc), one, h) ==
            Catch::Approx(3.0).epsilon(1e-9));

    // power weight (1+t)^-2 against phi = 1: 1 - 1/(1+T)
    REQUIRE(line_distribution_pairing(ray_curve(0.0, 1.0), WeightSpec::power(2.0), one, h) ==
            Catch::Approx(1.0 - 1.0 / 4.0).epsilon(1e-9));
}

TEST_CASE("ray convolution with unit weight reduces to the directional antiderivative") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {128, 128});
    const SampledField f = bump_field(grid, 0.0, 0.0, 0.5);
    const CurveSpec ray = ray_curve(1.0, 0.0);
    const SupportHorizon h = validate_support_bounded(ray, f, grid, 20.0);
    const SampledField conv =
        convolve_quadrature(f, ray, WeightSpec::unit(), h, grid);
    const SampledField anti =
        cumulative_antiderivative(f, Direction::normalized({1.0, 0.0}), grid);
    REQUIRE(rel_l2_difference(conv, anti) <= 1e-3);
}

TEST_CASE("quadrature and pullback convolutions agree on the arc") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 3.0}}, {64, 80});
    const SampledField f = bump_field(grid, 0.0, 0.0, 0.4);
    const CurveSpec arc = arc_curve();
    const SupportHorizon h{2.0 * M_PI};
    const SampledField quad = convolve_quadrature(f, arc, WeightSpec::unit(), h, grid);
    const SampledField pull64 = convolve_pullback(f, arc, WeightSpec::unit(), h, 64);
    const double err64 = rel_l2_difference(pull64, quad);
    REQUIRE(err64 <= 1e-2);
    const SampledField pull128 = convolve_pullback(f, arc, WeightSpec::unit(), h, 128);
    REQUIRE(rel_l2_difference(pull128, quad) < err64);
}

TEST_CASE("arc convolution of a concentrated spot lands on the shifted circle") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 3.0}}, {96, 120});
    PhantomSpec p;
    p.kind = PhantomKind::point_delta;
    p.point = {0.0, 0.0};
    const SampledField f = rasterize(p, grid, {0.08});
    const SampledField conv =
        convolve_quadrature(f, arc_curve(), WeightSpec::unit(), SupportHorizon{2.0 * M_PI},
                            grid);
    const double peak = conv.max_abs();
    REQUIRE(peak > 0.0);
    std::vector<index_t> idx(2);
    std::vector<double> x(2);
    for (index_t c = 0; c < conv.values.size(); ++c) {
        if (std::abs(conv.values[c]) < 0.05 * peak) continue;
        conv.grid.unflatten(c, idx);
        conv.grid.coord(idx, x);
        // support concentrates near the circle |x - (0,1)| = 1
        const double r = std::sqrt(x[0] * x[0] + (x[1] - 1.0) * (x[1] - 1.0));
        REQUIRE(std::abs(r - 1.0) < 0.3);
    }
}

TEST_CASE("pullback refuses to blow the memory budget") {
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64});
    const SampledField f = bump_field(grid, 0.0, 0.0, 0.5);
    REQUIRE_THROWS_WITH(convolve_pullback(f, arc_curve(), WeightSpec::unit(),
                                          SupportHorizon{2.0}, 64, 1024),
                        Catch::Matchers::ContainsSubstring("memory budget"));
    REQUIRE_THROWS_AS(convolve_pullback(f, arc_curve(), WeightSpec::unit(),
                                        SupportHorizon{2.0}, 8),
                      validation_error);
}

TEST_CASE("curve and weight json parsing round-trips") {
    const CurveSpec arc =
        CurveSpec::from_json(nlohmann::json::parse(R"({"kind":"arc","radius":1.5,"rate":0.5})"));
    REQUIRE(arc.kind == CurveSpec::Kind::arc);
    REQUIRE(arc.radius == 1.5);
    const auto back = arc.to_json();
    REQUIRE(back["kind"] == "arc");
    REQUIRE(back["radius"] == 1.5);
    REQUIRE_THROWS_AS(CurveSpec::from_json(nlohmann::json::parse(R"({"kind":"knot"})")),
                      validation_error);
    const WeightSpec w =
        WeightSpec::from_json(nlohmann::json::parse(R"({"kind":"power","p":1.5})"), arc);
    REQUIRE(w(0.0) == Catch::Approx(1.0));
    REQUIRE(w(1.0) == Catch::Approx(std::pow(2.0, -1.5)));
    REQUIRE_THROWS_AS(
        WeightSpec::from_json(nlohmann::json::parse(R"({"kind":"gauss"})"), arc),
        validation_error);
}
