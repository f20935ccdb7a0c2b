#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "twomem/dynamics.hpp"

namespace twomem {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

/// Means and symmetric covariance in the basis u = (x, y, q1, p1, q2, p2),
/// x = (a* + a)/sqrt2, y = i(a* - a)/sqrt2. Vacuum has C = I/2.
struct CovarianceState {
    Vec6 mean = Vec6::Zero();
    Mat6 cov = Mat6::Zero();
    double t = 0.0;

    /// Rows/columns of (q1, p1, q2, p2).
    Mat4 mechanical() const { return cov.bottomRightCorner<4, 4>(); }
};

/// u-vector of a c-number state.
Vec6 phase_space_vector(const SystemState& s);

/// Unbiased sample mean and covariance; needs at least two samples.
CovarianceState ensemble_moments(std::span<const Vec6> samples, double t = 0.0);

/// Moments from raw sums: n samples, sum u_i, and sum u_i u_j over i <= j
/// packed row-wise (21 entries).
CovarianceState moments_from_sums(double n, const std::array<double, 6>& sum, const std::array<double, 21>& cross,
                                  double t = 0.0);

/// Index of (i, j), i <= j, in the packed 21-entry upper triangle.
constexpr std::size_t packed_index(std::size_t i, std::size_t j) { return i * 6 - i * (i - 1) / 2 + (j - i); }

/// Smallest symplectic eigenvalue of the partially transposed mechanical
/// covariance (p2 flipped).
double partial_transpose_eigenvalue(const Mat4& v);

/// max(0, -ln 2 zeta). Throws NonPhysicalError when -(sigma v~)^2 has an
/// eigenvalue below -1e-10.
double logarithmic_negativity(const Mat4& mechanical);
double logarithmic_negativity(const CovarianceState& state);

/// Var(|alpha| q1 + q2/alpha) + Var(|alpha| p1 - p2/alpha); below 2 certifies entanglement.
double duan_sum(const Mat4& mechanical, double alpha);
double duan_sum(const CovarianceState& state, double alpha);

/// Linear map from (q1, p1, q2, p2) to two plotting coordinates.
using PlaneTransform = Eigen::Matrix<double, 2, 4>;
PlaneTransform identity_plane(std::size_t mode);  ///< (q_j, p_j) for mode 1 or 2
/// (|alpha| q1 + q2/alpha, |alpha| p1 - p2/alpha).
PlaneTransform epr_plane(double alpha);

/// Square-bin histogram centred on multiples of h: bin index
/// ceil(X/h - 1/2), covering [-half_extent, half_extent] on both axes.
/// Counts are integers, so accumulation order never changes the result.
class PhaseSpaceHistogram {
public:
    PhaseSpaceHistogram(const PlaneTransform& transform, double h, double half_extent);

    void add(const std::array<double, 4>& mech);
    void merge(const PhaseSpaceHistogram& other);

    double h() const noexcept { return h_; }
    std::int64_t half_bins() const noexcept { return half_; }
    std::size_t side() const noexcept { return static_cast<std::size_t>(2 * half_ + 1); }
    double centre(std::size_t index) const { return (static_cast<double>(index) - static_cast<double>(half_)) * h_; }
    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t inside() const noexcept { return inside_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    std::vector<std::uint64_t>& counts() noexcept { return counts_; }
    void set_totals(std::uint64_t total, std::uint64_t inside) { total_ = total, inside_ = inside; }
    const PlaneTransform& transform() const noexcept { return transform_; }

    /// count / (N h^2), row-major with the first coordinate outer.
    std::vector<double> density() const;

private:
    PlaneTransform transform_;
    double h_;
    std::int64_t half_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    std::uint64_t inside_ = 0;
};

PhaseSpaceHistogram phase_space_histogram(std::span<const std::array<double, 4>> samples,
                                          const PlaneTransform& transform, double h, double half_extent);

/// Linearised fluctuation dynamics around the mean of the first-order model.
struct MeanfieldSystem {
    Mat6 S = Mat6::Zero();
    Mat6 N = Mat6::Zero();
    double Delta_pp = 0.0;  ///< Delta' + g1 <q1> + g2 <q2>
};

/// Drift and diffusion (rad/s) at the given means (x, y, q1, p1, q2, p2).
/// Diffusion diag(k(2na+1), k(2na+1), 0, g1(2n1+1), 0, g2(2n2+1)).
MeanfieldSystem meanfield_system(const PhysicalParams& params, const CouplingSet& couplings, const Vec6& means);

/// Solves S C + C S^T + N = 0 through the 36x36 Kronecker system.
Mat6 lyapunov_steady_state(const Mat6& S, const Mat6& N);

struct MeanfieldOptions {
    double dtau = 0.005;
    double tau_end = 0.0;
    std::size_t stride = 1;
    /// Start from vacuum: zero means, C = I/2.
    CovarianceState initial = {Vec6::Zero(), 0.5 * Mat6::Identity(), 0.0};
};

/// RK4 integration of the mean equations coupled to dC/dt = S C + C S^T + N.
/// Samples carry t in seconds. Throws NonFiniteError on blow-up.
std::vector<CovarianceState> meanfield_evolve(const PhysicalParams& params, const CouplingSet& couplings,
                                              const DriveSpec& drive, const MeanfieldOptions& options);

/// (1/(t2 - t1)) int |En_s - En_m| dt by the trapezoid rule over the samples
/// of the common grid inside [t1, t2].
double error_metric(std::span<const double> t, std::span<const double> En_stochastic,
                    std::span<const double> En_meanfield, double t1, double t2);

}  // namespace twomem
