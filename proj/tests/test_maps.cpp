#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "twomem/constants.hpp"
#include "twomem/gridfile.hpp"
#include "twomem/maps.hpp"

using namespace twomem;

namespace {

PhysicalParams base() { return PhysicalParams::reference(); }

const CouplingMap& reference_map() {
    static const CouplingMap map = scan_plane(base(), GridSpec::square(0.25, 0.75, 64), 2);
    return map;
}

}  // namespace

TEST(ScanPlane, CellsMatchPointEvaluation) {
    const auto& map = reference_map();
    ASSERT_EQ(map.cells.size(), 64u * 64u);
    EXPECT_EQ(map.params_digest, base().digest());
    const auto p = base();
    for (std::size_t i : {0u, 17u, 63u}) {
        for (std::size_t j : {5u, 40u}) {
            const auto& c = map.cells[map.grid.index(i, j)];
            if (!map.valid[map.grid.index(i, j)]) continue;
            const auto want = coupling_coefficients(p, map.grid.q1(i) * p.lambda, map.grid.q2(j) * p.lambda);
            EXPECT_EQ(c.g1, want.g1);
            EXPECT_EQ(c.gt, want.gt);
        }
    }
}

TEST(ScanPlane, HalfWavelengthWindowShift) {
    const auto& a = reference_map();
    const auto b = scan_plane(base(), GridSpec::square(0.75, 1.25, 64), 2);
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        ASSERT_EQ(a.valid[k], b.valid[k]);
        if (!a.valid[k]) continue;
        EXPECT_NEAR(b.cells[k].g1, a.cells[k].g1, 1e-6 * std::abs(a.cells[k].g1) + 1e-9);
        EXPECT_NEAR(b.cells[k].g22, a.cells[k].g22, 1e-4 * std::abs(a.cells[k].g22) + 1e-12);
    }
    const auto ma = classify_regions(a), mb = classify_regions(b);
    EXPECT_NEAR(ma.union_fraction, mb.union_fraction, 3.0 / a.cells.size());
}

TEST(ScanPlane, ZeroReflectivityIsFlat) {
    auto p = base();
    p.reflectivity_override = Reflectivity{0.0, 0.0};
    const auto map = scan_plane(p, GridSpec::square(0.25, 0.75, 16), 1);
    for (const auto& c : map.cells) {
        EXPECT_EQ(c.g1, 0.0);
        EXPECT_EQ(c.g2, 0.0);
        EXPECT_EQ(c.g12, 0.0);
        EXPECT_EQ(c.gt, 0.0);
    }
    const auto mask = classify_regions(map);
    EXPECT_EQ(mask.union_fraction, 0.0);
    EXPECT_EQ(stripe_width(map, 1e-7).mean_width, 0.0);
}

TEST(ScanPlane, DeterministicAcrossWorkers) {
    const auto a = scan_plane(base(), GridSpec::square(0.3, 0.5, 16), 1);
    const auto b = scan_plane(base(), GridSpec::square(0.3, 0.5, 16), 3);
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        EXPECT_EQ(a.cells[k].g1, b.cells[k].g1);
        EXPECT_EQ(a.cells[k].gt, b.cells[k].gt);
    }
}

TEST(Regions, FractionsAreConsistent) {
    const auto mask = classify_regions(reference_map());
    for (double f : mask.fractions) {
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, mask.union_fraction);
    }
    EXPECT_LE(mask.union_fraction, 1.0);
    EXPECT_GT(mask.union_fraction, 0.0);
    std::size_t count = 0;
    for (auto v : mask.union_mask) count += v;
    EXPECT_NEAR(mask.union_fraction, static_cast<double>(count) / (mask.union_mask.size() - mask.holes), 1e-15);
}

TEST(Regions, MonotoneInThreshold) {
    double last = 2.0;
    for (double scale : {1e8, 1e7, 3e6, 1e6, 1e5}) {
        const auto mask = classify_regions(reference_map(), scale);
        EXPECT_LE(mask.union_fraction, last);
        last = mask.union_fraction;
    }
    EXPECT_EQ(classify_regions(reference_map(), 1e-300).union_fraction, 0.0);
}

TEST(Regions, ResolutionConvergence) {
    const auto coarse = classify_regions(reference_map());
    const auto fine = classify_regions(scan_plane(base(), GridSpec::square(0.25, 0.75, 128), 2));
    EXPECT_LT(std::abs(coarse.union_fraction - fine.union_fraction), 0.01);
}

TEST(Contour, StraightLineAndCircle) {
    const auto g = GridSpec::square(0.0, 1.0, 101);
    std::vector<double> line(g.size()), circle(g.size());
    const std::vector<std::uint8_t> valid(g.size(), 1);
    for (std::size_t i = 0; i < g.n1; ++i)
        for (std::size_t j = 0; j < g.n2; ++j) {
            line[g.index(i, j)] = g.q1(i) - 0.503;
            circle[g.index(i, j)] = std::hypot(g.q1(i) - 0.5, g.q2(j) - 0.5) - 0.3;
        }
    // the lattice of cell centres spans 1 - 1/101
    EXPECT_NEAR(zero_contour_length(g, line, valid), 1.0 - 1.0 / 101, 1e-12);
    EXPECT_NEAR(zero_contour_length(g, circle, valid) / (kTwoPi * 0.3), 1.0, 3e-3);
    std::vector<double> flat(g.size(), 1.0);
    EXPECT_EQ(zero_contour_length(g, flat, valid), 0.0);
}

TEST(StripeWidth, PositiveForReference) {
    const auto w = stripe_width(reference_map(), std::pow(10.0, -7.5));
    EXPECT_GT(w.stripe_length, 0.0);
    EXPECT_GT(w.mean_width, 0.0);
    EXPECT_NEAR(w.mean_width, w.masked_area / w.stripe_length, 1e-15);
}

TEST(GridFile, MapRoundTrip) {
    const auto map = scan_plane(base(), GridSpec::square(0.3, 0.6, 16), 1);
    const auto mask = classify_regions(map);
    const auto path = std::filesystem::temp_directory_path() / "twomem_map_roundtrip.csv";
    write_map_file(path, map, mask, {"[physical]", "L = 9 cm"});
    const auto t = read_table(path);
    EXPECT_EQ(t.header.kind, "coupling_map");
    ASSERT_EQ(t.rows.size(), map.cells.size());
    ASSERT_EQ(t.header.config_lines.size(), 2u);
    const std::size_t g1 = t.column("g1"), q1 = t.column("Q1");
    for (std::size_t k = 0; k < map.cells.size(); ++k) {
        EXPECT_EQ(t.rows[k][g1], map.cells[k].g1);
        EXPECT_EQ(t.rows[k][q1], map.grid.q1(k / map.grid.n2));
    }
    std::filesystem::remove(path);
}
