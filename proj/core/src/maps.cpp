#include "twomem/maps.hpp"

#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "twomem/errors.hpp"
#include "twomem/gridfile.hpp"
#include "twomem/parallel.hpp"

namespace twomem {

namespace {

void check_grid(const GridSpec& grid) {
    if (grid.n1 < 2 || grid.n2 < 2) throw DomainError("grid needs at least 2 cells per axis");
    if (!(grid.q1_max > grid.q1_min) || !(grid.q2_max > grid.q2_min))
        throw DomainError("grid ranges must be increasing");
}

bool exceeds(double higher, double linear, double threshold) {
    return std::abs(higher) > threshold * std::abs(linear);
}

}  // namespace

CouplingMap scan_plane(const PhysicalParams& params, const GridSpec& grid, unsigned workers,
                       const SecondDerivativeOptions& fd) {
    check_grid(grid);
    params.validate();
    CouplingMap map;
    map.grid = grid;
    map.cells.resize(grid.size());
    map.valid.assign(grid.size(), 0);
    map.params_digest = params.digest();
    const double lambda = params.lambda;

    parallel_for(grid.n1, workers, [&](std::size_t i) {
        for (std::size_t j = 0; j < grid.n2; ++j) {
            const std::size_t idx = grid.index(i, j);
            try {
                map.cells[idx] = coupling_coefficients(params, grid.q1(i) * lambda, grid.q2(j) * lambda, fd);
                map.valid[idx] = 1;
            } catch (const DomainError&) {
                map.cells[idx] = CouplingSet{};
            }
        }
    });
    for (auto v : map.valid) map.holes += v ? 0 : 1;
    return map;
}

RegionMask classify_regions(const CouplingMap& map, double amplitude_scale, double fraction) {
    if (!(amplitude_scale > 0.0)) throw DomainError("amplitude scale must be positive");
    if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("fraction must lie in (0, 1)");
    const std::size_t n = map.cells.size();
    RegionMask out;
    out.grid = map.grid;
    out.threshold = fraction / amplitude_scale;
    out.holes = map.holes;
    for (auto& m : out.masks) m.assign(n, 0);
    out.union_mask.assign(n, 0);

    std::array<std::size_t, kRegionCriteria> counts{};
    std::size_t union_count = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (!map.valid[idx]) continue;
        const CouplingSet& c = map.cells[idx];
        const std::array<bool, kRegionCriteria> hit{exceeds(c.g12, c.g1, out.threshold),
                                                    exceeds(c.g22, c.g2, out.threshold),
                                                    exceeds(c.gt, c.g1, out.threshold),
                                                    exceeds(c.gt, c.g2, out.threshold)};
        bool any = false;
        for (std::size_t k = 0; k < kRegionCriteria; ++k) {
            out.masks[k][idx] = hit[k];
            counts[k] += hit[k];
            any = any || hit[k];
        }
        out.union_mask[idx] = any;
        union_count += any;
    }
    const std::size_t usable = n - map.holes;
    if (usable > 0) {
        for (std::size_t k = 0; k < kRegionCriteria; ++k)
            out.fractions[k] = static_cast<double>(counts[k]) / static_cast<double>(usable);
        out.union_fraction = static_cast<double>(union_count) / static_cast<double>(usable);
    }
    return out;
}

std::vector<LineSample> scan_line(const PhysicalParams& params, double q2, double q1_min, double q1_max,
                                  std::size_t points, const SecondDerivativeOptions& fd) {
    if (points < 2) throw DomainError("line scan needs at least 2 points");
    std::vector<LineSample> out(points);
    for (std::size_t i = 0; i < points; ++i) {
        auto& s = out[i];
        s.q1 = q1_min + (q1_max - q1_min) * static_cast<double>(i) / static_cast<double>(points - 1);
        try {
            s.couplings = coupling_coefficients(params, s.q1 * params.lambda, q2 * params.lambda, fd);
            s.valid = true;
        } catch (const DomainError&) {
            s.valid = false;
        }
    }
    return out;
}

double zero_contour_length(const GridSpec& grid, const std::vector<double>& values,
                           const std::vector<std::uint8_t>& valid) {
    const double dx = (grid.q1_max - grid.q1_min) / static_cast<double>(grid.n1);
    const double dy = (grid.q2_max - grid.q2_min) / static_cast<double>(grid.n2);
    struct Point {
        double x, y;
    };
    auto crossing = [](double va, double vb) { return va / (va - vb); };
    auto dist = [&](Point a, Point b) { return std::hypot((a.x - b.x) * dx, (a.y - b.y) * dy); };

    double length = 0.0;
    for (std::size_t i = 0; i + 1 < grid.n1; ++i) {
        for (std::size_t j = 0; j + 1 < grid.n2; ++j) {
            const std::size_t i00 = grid.index(i, j), i10 = grid.index(i + 1, j);
            const std::size_t i01 = grid.index(i, j + 1), i11 = grid.index(i + 1, j + 1);
            if (!valid[i00] || !valid[i10] || !valid[i01] || !valid[i11]) continue;
            const double v00 = values[i00], v10 = values[i10], v01 = values[i01], v11 = values[i11];
            const bool s00 = v00 > 0, s10 = v10 > 0, s01 = v01 > 0, s11 = v11 > 0;
            // local coordinates in cell units; x along Q1, y along Q2
            std::optional<Point> bottom, right, top, left;
            if (s00 != s10) bottom = Point{crossing(v00, v10), 0.0};
            if (s10 != s11) right = Point{1.0, crossing(v10, v11)};
            if (s01 != s11) top = Point{crossing(v01, v11), 1.0};
            if (s00 != s01) left = Point{0.0, crossing(v00, v01)};
            const int n = bottom.has_value() + right.has_value() + top.has_value() + left.has_value();
            if (n == 2) {
                std::array<Point, 2> p{};
                int k = 0;
                for (const auto* e : {&bottom, &right, &top, &left})
                    if (e->has_value()) p[k++] = **e;
                length += dist(p[0], p[1]);
            } else if (n == 4) {
                const bool centre = 0.25 * (v00 + v10 + v01 + v11) > 0;
                if (centre == s00) {
                    length += dist(*bottom, *right) + dist(*top, *left);
                } else {
                    length += dist(*bottom, *left) + dist(*top, *right);
                }
            }
        }
    }
    return length;
}

StripeWidth stripe_width(const CouplingMap& map, double threshold) {
    const std::size_t n = map.cells.size();
    std::vector<double> g1(n), g2(n);
    std::size_t count = 0, union_count = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        const CouplingSet& c = map.cells[idx];
        g1[idx] = c.g1;
        g2[idx] = c.g2;
        if (!map.valid[idx]) continue;
        const bool m1 = exceeds(c.g12, c.g1, threshold);
        const bool m2 = exceeds(c.g22, c.g2, threshold);
        count += m1 + m2;
        union_count += (m1 || m2);
    }
    StripeWidth out;
    out.masked_area = static_cast<double>(count) * map.grid.cell_area();
    out.stripe_length = zero_contour_length(map.grid, g1, map.valid) + zero_contour_length(map.grid, g2, map.valid);
    out.mean_width = out.stripe_length > 0.0 ? out.masked_area / out.stripe_length : 0.0;
    const std::size_t usable = n - map.holes;
    out.masked_fraction = usable ? static_cast<double>(union_count) / static_cast<double>(usable) : 0.0;
    return out;
}

std::vector<RegionWidthPoint> region_width_sweep(const PhysicalParams& params, const std::vector<double>& Lz_values,
                                                 const GridSpec& grid, double threshold, unsigned workers) {
    std::vector<RegionWidthPoint> out;
    out.reserve(Lz_values.size());
    for (double Lz : Lz_values) {
        if (!(Lz > 0.0)) throw DomainError(fmt::format("membrane thickness must be positive (got {})", Lz));
        PhysicalParams p = params;
        p.Lz = Lz;
        RegionWidthPoint point;
        point.Lz = Lz;
        point.reflectivity = p.reflectivity();
        point.chi1 = p.chi_zpf1();
        point.chi2 = p.chi_zpf2();
        point.width = stripe_width(scan_plane(p, grid, workers), threshold);
        out.push_back(point);
    }
    return out;
}

void write_map_file(const std::filesystem::path& path, const CouplingMap& map, const RegionMask& mask,
                    const std::vector<std::string>& config_lines,
                    const std::vector<std::pair<std::string, std::string>>& extra_meta) {
    const GridSpec& g = map.grid;
    TableHeader header;
    header.kind = "coupling_map";
    header.meta = {
        {"params_digest", map.params_digest},
        {"grid", fmt::format("Q1/lambda in [{}, {}] x {}, Q2/lambda in [{}, {}] x {}", g.q1_min, g.q1_max, g.n1,
                             g.q2_min, g.q2_max, g.n2)},
        {"holes", std::to_string(map.holes)},
        {"threshold", format_number(mask.threshold)},
        {"fraction_g12_g1", format_number(mask.fractions[0])},
        {"fraction_g22_g2", format_number(mask.fractions[1])},
        {"fraction_gt_g1", format_number(mask.fractions[2])},
        {"fraction_gt_g2", format_number(mask.fractions[3])},
        {"fraction_union", format_number(mask.union_fraction)},
        {"units", "Q in lambda; couplings in rad/s"},
    };
    header.meta.insert(header.meta.end(), extra_meta.begin(), extra_meta.end());
    header.config_lines = config_lines;
    header.columns = {"Q1",      "Q2",       "delta_omega0", "g1",      "g2",      "g12",     "g22",
                      "gt",      "valid",    "mask_g12_g1",  "mask_g22_g2", "mask_gt_g1", "mask_gt_g2",
                      "mask_union"};
    TableWriter writer(path, header);
    for (std::size_t i = 0; i < g.n1; ++i) {
        for (std::size_t j = 0; j < g.n2; ++j) {
            const std::size_t idx = g.index(i, j);
            const CouplingSet& c = map.cells[idx];
            writer.row({g.q1(i), g.q2(j), c.delta_omega0, c.g1, c.g2, c.g12, c.g22, c.gt,
                        static_cast<double>(map.valid[idx]), static_cast<double>(mask.masks[0][idx]),
                        static_cast<double>(mask.masks[1][idx]), static_cast<double>(mask.masks[2][idx]),
                        static_cast<double>(mask.masks[3][idx]), static_cast<double>(mask.union_mask[idx])});
        }
    }
    writer.close();
}

}  // namespace twomem
