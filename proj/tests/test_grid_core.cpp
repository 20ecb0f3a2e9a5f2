// Grids, fields, interpolation, directions, file formats, parallel map.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "mlprop/grid.hpp"
#include "mlprop/io.hpp"
#include "mlprop/parallel.hpp"

using namespace mlprop;

namespace {

SampledField make_affine_field() {
    // f(x, y) = 2x + 3y - 1 sampled on [-1, 1)^2 at 8x8.
    SampledField f;
    f.grid = make_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {8, 8});
    f.values.resize(64);
    for (index_t i = 0; i < 8; ++i)
        for (index_t j = 0; j < 8; ++j)
            f.values[i * 8 + j] = 2.0 * f.grid.coord(0, i) + 3.0 * f.grid.coord(1, j) - 1.0;
    return f;
}

} // namespace

TEST_CASE("grid indexing round-trips and coordinates are affine") {
    const GridSpec g = make_grid({{-2.0, 2.0}, {0.0, 1.0}}, {16, 8});
    REQUIRE(g.dim() == 2);
    REQUIRE(g.cell_count() == 128);
    REQUIRE(g.spacing[0] == Catch::Approx(0.25));
    REQUIRE(g.spacing[1] == Catch::Approx(0.125));
    REQUIRE(g.coord(0, 0) == -2.0);
    REQUIRE(g.coord(0, 4) == Catch::Approx(-1.0));

    std::vector<index_t> idx(2);
    for (index_t f = 0; f < g.cell_count(); ++f) {
        g.unflatten(f, idx);
        REQUIRE(g.flat_index(idx) == f);
    }
    // row-major: last axis fastest
    g.unflatten(1, idx);
    REQUIRE(idx[0] == 0);
    REQUIRE(idx[1] == 1);
}

TEST_CASE("grid validation rejects degenerate specs") {
    REQUIRE_THROWS_AS(make_grid({{0.0, 0.0}}, {8}), validation_error);
    REQUIRE_THROWS_AS(make_grid({{0.0, 1.0}}, {3}), validation_error);
    GridSpec g;
    g.shape = {8, 8};
    g.spacing = {0.1};
    g.origin = {0.0, 0.0};
    REQUIRE_THROWS_AS(g.validate(), validation_error);
}

TEST_CASE("multilinear interpolation is exact on affine data and zero outside") {
    const SampledField f = make_affine_field();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-0.99, 0.74); // inside the node hull
    for (int k = 0; k < 200; ++k) {
        const double p[2] = {u(rng), u(rng)};
        REQUIRE(f.interpolate(p) ==
                Catch::Approx(2.0 * p[0] + 3.0 * p[1] - 1.0).margin(1e-12));
    }
    const double outside[2] = {5.0, 0.0};
    REQUIRE(f.interpolate(outside) == 0.0);
    const double node[2] = {f.grid.coord(0, 3), f.grid.coord(1, 5)};
    REQUIRE(f.interpolate(node) == Catch::Approx(f.values[3 * 8 + 5]));
}

TEST_CASE("field validation enforces the declared support margin") {
    SampledField f;
    f.grid = make_grid({{0.0, 1.0}, {0.0, 1.0}}, {8, 8});
    f.values.assign(64, 0.0);
    f.values[0] = 1.0; // corner cell
    f.support_margin = 2;
    REQUIRE_THROWS_AS(f.validate(), validation_error);
    f.values[0] = 0.0;
    f.values[3 * 8 + 3] = 1.0;
    REQUIRE_NOTHROW(f.validate());

    std::vector<index_t> lo, hi;
    f.nonzero_box(lo, hi);
    REQUIRE(lo == std::vector<index_t>{3, 3});
    REQUIRE(hi == std::vector<index_t>{3, 3});
    f.values.assign(64, 0.0);
    REQUIRE_THROWS_WITH(f.nonzero_box(lo, hi), Catch::Matchers::ContainsSubstring("empty support"));
}

TEST_CASE("field file encoding round-trips bit-exactly and is deterministic") {
    SampledField f = make_affine_field();
    f.support_margin = 0;
    const std::string bytes1 = encode_field(f);
    const std::string bytes2 = encode_field(f);
    REQUIRE(bytes1 == bytes2);
    REQUIRE(bytes1.compare(0, 4, "MLF1") == 0);

    const SampledField g = decode_field(bytes1);
    REQUIRE(g.grid == f.grid);
    REQUIRE(g.values == f.values);
    REQUIRE(g.support_margin == f.support_margin);
}

TEST_CASE("field file decoding rejects malformed inputs with distinct errors") {
    const std::string good = encode_field(make_affine_field());
    REQUIRE_THROWS_WITH(decode_field("XXXX" + good.substr(4)),
                        Catch::Matchers::ContainsSubstring("bad magic"));
    REQUIRE_THROWS_WITH(decode_field(good.substr(0, 10)),
                        Catch::Matchers::ContainsSubstring("truncated header"));
    REQUIRE_THROWS_WITH(decode_field(good.substr(0, good.size() - 8)),
                        Catch::Matchers::ContainsSubstring("truncated payload"));
    REQUIRE_THROWS_WITH(decode_field(good + std::string(8, '\0')),
                        Catch::Matchers::ContainsSubstring("size mismatch"));
}

TEST_CASE("wavefront csv round-trips samples") {
    WavefrontSet wf;
    wf.direction_count = 8;
    PhaseSpaceSample s;
    s.x = {0.25, -1.5};
    s.theta = Direction::normalized({1.0, 1.0});
    s.decay_order = 1.75;
    s.log_constant = -3.5;
    s.singular = true;
    wf.samples.push_back(s);
    s.singular = false;
    s.theta = Direction::normalized({0.0, -1.0});
    wf.samples.push_back(s);

    const auto path = std::filesystem::temp_directory_path() / "wf_roundtrip.csv";
    write_wavefront_csv(wf, path.string());
    const WavefrontSet back = read_wavefront_csv(path.string());
    REQUIRE(back.samples.size() == 2);
    REQUIRE(back.samples[0].x == wf.samples[0].x);
    REQUIRE(back.samples[0].singular);
    REQUIRE_FALSE(back.samples[1].singular);
    REQUIRE(back.samples[0].theta.angle() ==
            Catch::Approx(wf.samples[0].theta.angle()).margin(1e-12));
    REQUIRE(back.samples[0].decay_order == wf.samples[0].decay_order);
    std::filesystem::remove(path);
}

TEST_CASE("directions are unit vectors with consistent angles") {
    REQUIRE_THROWS_AS(Direction({1.0, 1.0}), validation_error);
    const auto dirs = discretize_directions(12);
    REQUIRE(dirs.size() == 12);
    for (index_t k = 0; k < 12; ++k)
        REQUIRE(dirs[k].angle() == Catch::Approx(2.0 * M_PI * k / 12.0).margin(1e-12));
    REQUIRE(angle_between(dirs[0], dirs[6]) == Catch::Approx(M_PI));
    REQUIRE(angle_between_mod_sign(dirs[0], dirs[6]) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(angle_between_mod_sign(dirs[0], dirs[3]) == Catch::Approx(M_PI / 2));
    REQUIRE_THROWS_AS(discretize_directions(4), validation_error);
}

TEST_CASE("parallel map is deterministic and honors the thread cap") {
    std::vector<double> out(1000, 0.0);
    parallel_for(out.size(), [&](index_t i) { out[i] = std::sqrt(static_cast<double>(i)); });
    std::vector<double> ref(1000, 0.0);
    setenv("MLPROP_THREADS", "1", 1);
    REQUIRE(worker_count() == 1);
    parallel_for(ref.size(), [&](index_t i) { ref[i] = std::sqrt(static_cast<double>(i)); });
    unsetenv("MLPROP_THREADS");
    REQUIRE(out == ref);

    REQUIRE_THROWS_AS(parallel_for(8,
                                   [](index_t i) {
                                       if (i == 5) throw numeric_error("boom");
                                   }),
                      numeric_error);
}
