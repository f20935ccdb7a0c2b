#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "twomem/model.hpp"

namespace twomem {

/// Rectangular grid in the Q1-Q2 plane. Ranges are in units of lambda and
/// the sample points are cell centres.
struct GridSpec {
    double q1_min = 0.25, q1_max = 0.75;
    std::size_t n1 = 64;
    double q2_min = 0.25, q2_max = 0.75;
    std::size_t n2 = 64;

    static GridSpec square(double lo, double hi, std::size_t n) { return {lo, hi, n, lo, hi, n}; }
    double q1(std::size_t i) const { return q1_min + (static_cast<double>(i) + 0.5) * (q1_max - q1_min) / n1; }
    double q2(std::size_t j) const { return q2_min + (static_cast<double>(j) + 0.5) * (q2_max - q2_min) / n2; }
    double cell_area() const { return (q1_max - q1_min) / n1 * (q2_max - q2_min) / n2; }
    std::size_t size() const { return n1 * n2; }
    std::size_t index(std::size_t i, std::size_t j) const { return i * n2 + j; }
};

struct CouplingMap {
    GridSpec grid;
    std::vector<CouplingSet> cells;  ///< row-major, Q1 index outer
    std::vector<std::uint8_t> valid;
    std::size_t holes = 0;
    std::string params_digest;
};

enum class RegionCriterion : std::size_t { G12OverG1 = 0, G22OverG2 = 1, GtOverG1 = 2, GtOverG2 = 3 };
inline constexpr std::size_t kRegionCriteria = 4;

struct RegionMask {
    GridSpec grid;
    double threshold = 0.0;
    std::array<std::vector<std::uint8_t>, kRegionCriteria> masks;
    std::vector<std::uint8_t> union_mask;
    std::array<double, kRegionCriteria> fractions{};
    double union_fraction = 0.0;
    std::size_t holes = 0;
};

/// Evaluates coupling_coefficients at every cell. Cells where the model
/// raises DomainError are recorded as holes.
CouplingMap scan_plane(const PhysicalParams& params, const GridSpec& grid, unsigned workers = 0,
                       const SecondDerivativeOptions& fd = {});

/// Cells where a higher-order coupling exceeds `fraction` of the linear one
/// at displacement `amplitude_scale`: |g_j2 / g_j| or |gt / g_j| above
/// fraction / amplitude_scale. Fractions are normalised by the non-hole count.
RegionMask classify_regions(const CouplingMap& map, double amplitude_scale = 3162277.6601683795,
                            double fraction = 0.1);

/// Coupling sets along Q1 (units of lambda) at fixed Q2.
struct LineSample {
    double q1 = 0.0;
    bool valid = false;
    CouplingSet couplings;
};
std::vector<LineSample> scan_line(const PhysicalParams& params, double q2, double q1_min, double q1_max,
                                  std::size_t points, const SecondDerivativeOptions& fd = {});

/// Width of the "#"-shaped region where |g_j2 / g_j| > threshold.
///
/// Each stripe is centred on a zero line of g_j. The width is the masked
/// area of both criteria divided by the total length of those zero lines:
///
///     mean_width = (A_1 + A_2) / (len(g_1 = 0) + len(g_2 = 0))
///
/// with areas in lambda^2 and lengths (marching squares on the cell-centre
/// lattice) in lambda. Holes are excluded; zero when no zero line exists.
struct StripeWidth {
    double masked_area = 0.0;
    double stripe_length = 0.0;
    double mean_width = 0.0;
    double masked_fraction = 0.0;
};
StripeWidth stripe_width(const CouplingMap& map, double threshold);

/// Length of the zero level set of a scalar field sampled on the grid.
double zero_contour_length(const GridSpec& grid, const std::vector<double>& values,
                           const std::vector<std::uint8_t>& valid);

struct RegionWidthPoint {
    double Lz = 0.0;
    Reflectivity reflectivity;
    double chi1 = 0.0, chi2 = 0.0;
    StripeWidth width;
};

/// Recomputes reflectivity, masses and chi_zpf for each thickness and
/// measures the stripe width with the |g_j2 / g_j| criterion.
std::vector<RegionWidthPoint> region_width_sweep(const PhysicalParams& params, const std::vector<double>& Lz_values,
                                                 const GridSpec& grid, double threshold = 3.1622776601683795e-8,
                                                 unsigned workers = 0);

/// Grid file with per-cell couplings (rad/s) and masks; Q in units of lambda.
void write_map_file(const std::filesystem::path& path, const CouplingMap& map, const RegionMask& mask,
                    const std::vector<std::string>& config_lines = {},
                    const std::vector<std::pair<std::string, std::string>>& extra_meta = {});

}  // namespace twomem
