#include "twomem/quantum.hpp"

#include <cmath>

#include <fmt/format.h>

#include "twomem/errors.hpp"

namespace twomem {

namespace {

constexpr double kNegativeTolerance = 1e-10;
const double kSqrt2 = std::sqrt(2.0);

Mat4 flip_p2(const Mat4& v) {
    Mat4 out = v;
    out.row(3) *= -1.0;
    out.col(3) *= -1.0;
    return out;
}

Mat4 symplectic_form() {
    Mat4 s = Mat4::Zero();
    s(0, 1) = 1.0;
    s(1, 0) = -1.0;
    s(2, 3) = 1.0;
    s(3, 2) = -1.0;
    return s;
}

}  // namespace

Vec6 phase_space_vector(const SystemState& s) {
    Vec6 u;
    u << kSqrt2 * s.a.real(), kSqrt2 * s.a.imag(), s.q1, s.p1, s.q2, s.p2;
    return u;
}

CovarianceState ensemble_moments(std::span<const Vec6> samples, double t) {
    if (samples.size() < 2) throw DomainError("ensemble moments need at least two samples");
    CovarianceState out;
    out.t = t;
    for (const auto& u : samples) out.mean += u;
    out.mean /= static_cast<double>(samples.size());
    for (const auto& u : samples) {
        const Vec6 d = u - out.mean;
        out.cov.noalias() += d * d.transpose();
    }
    out.cov /= static_cast<double>(samples.size() - 1);
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

CovarianceState moments_from_sums(double n, const std::array<double, 6>& sum, const std::array<double, 21>& cross,
                                  double t) {
    if (n < 2.0) throw DomainError("ensemble moments need at least two samples");
    CovarianceState out;
    out.t = t;
    for (std::size_t i = 0; i < 6; ++i) out.mean(i) = sum[i] / n;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = i; j < 6; ++j) {
            const double c = (cross[packed_index(i, j)] - n * out.mean(i) * out.mean(j)) / (n - 1.0);
            out.cov(i, j) = c;
            out.cov(j, i) = c;
        }
    }
    return out;
}

double partial_transpose_eigenvalue(const Mat4& v) {
    const Mat4 sigma = symplectic_form();
    const Mat4 sv = sigma * flip_p2(v);
    const Mat4 m = -(sv * sv);
    const Eigen::EigenSolver<Mat4> solver(m, false);
    double lowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < 4; ++i) lowest = std::min(lowest, solver.eigenvalues()(i).real());
    if (lowest < -kNegativeTolerance)
        throw NonPhysicalError(fmt::format("partially transposed covariance has eigenvalue {:.3e} < 0", lowest));
    return std::sqrt(std::max(0.0, lowest));
}

double logarithmic_negativity(const Mat4& mechanical) {
    const double zeta = partial_transpose_eigenvalue(mechanical);
    return std::max(0.0, -std::log(2.0 * zeta));
}

double logarithmic_negativity(const CovarianceState& state) { return logarithmic_negativity(state.mechanical()); }

double duan_sum(const Mat4& v, double alpha) {
    if (alpha == 0.0) throw DomainError("Duan weight alpha must be nonzero");
    const double a = std::abs(alpha);
    const double b = 1.0 / alpha;
    const double u = a * a * v(0, 0) + b * b * v(2, 2) + 2.0 * a * b * v(0, 2);
    const double w = a * a * v(1, 1) + b * b * v(3, 3) - 2.0 * a * b * v(1, 3);
    return u + w;
}

double duan_sum(const CovarianceState& state, double alpha) { return duan_sum(state.mechanical(), alpha); }

// ---------------------------------------------------------------------------

PlaneTransform identity_plane(std::size_t mode) {
    if (mode != 1 && mode != 2) throw DomainError("mode must be 1 or 2");
    PlaneTransform t = PlaneTransform::Zero();
    const Eigen::Index base = mode == 1 ? 0 : 2;
    t(0, base) = 1.0;
    t(1, base + 1) = 1.0;
    return t;
}

PlaneTransform epr_plane(double alpha) {
    if (alpha == 0.0) throw DomainError("EPR weight alpha must be nonzero");
    PlaneTransform t = PlaneTransform::Zero();
    t(0, 0) = std::abs(alpha);
    t(0, 2) = 1.0 / alpha;
    t(1, 1) = std::abs(alpha);
    t(1, 3) = -1.0 / alpha;
    return t;
}

PhaseSpaceHistogram::PhaseSpaceHistogram(const PlaneTransform& transform, double h, double half_extent)
    : transform_(transform), h_(h) {
    if (!(h > 0.0)) throw DomainError("histogram bin width must be positive");
    if (!(half_extent > 0.0)) throw DomainError("histogram extent must be positive");
    half_ = static_cast<std::int64_t>(std::ceil(half_extent / h - 0.5));
    counts_.assign(side() * side(), 0);
}

void PhaseSpaceHistogram::add(const std::array<double, 4>& mech) {
    const Eigen::Vector4d v(mech[0], mech[1], mech[2], mech[3]);
    const Eigen::Vector2d X = transform_ * v;
    ++total_;
    const double ix = std::ceil(X(0) / h_ - 0.5);
    const double iy = std::ceil(X(1) / h_ - 0.5);
    const double lim = static_cast<double>(half_);
    if (!(std::abs(ix) <= lim) || !(std::abs(iy) <= lim)) return;
    const auto i = static_cast<std::size_t>(static_cast<std::int64_t>(ix) + half_);
    const auto j = static_cast<std::size_t>(static_cast<std::int64_t>(iy) + half_);
    ++counts_[i * side() + j];
    ++inside_;
}

void PhaseSpaceHistogram::merge(const PhaseSpaceHistogram& other) {
    if (other.counts_.size() != counts_.size() || other.h_ != h_)
        throw DomainError("cannot merge histograms with different grids");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    total_ += other.total_;
    inside_ += other.inside_;
}

std::vector<double> PhaseSpaceHistogram::density() const {
    std::vector<double> out(counts_.size(), 0.0);
    if (total_ == 0) return out;
    const double norm = 1.0 / (static_cast<double>(total_) * h_ * h_);
    for (std::size_t k = 0; k < counts_.size(); ++k) out[k] = static_cast<double>(counts_[k]) * norm;
    return out;
}

PhaseSpaceHistogram phase_space_histogram(std::span<const std::array<double, 4>> samples,
                                          const PlaneTransform& transform, double h, double half_extent) {
    PhaseSpaceHistogram hist(transform, h, half_extent);
    for (const auto& s : samples) hist.add(s);
    return hist;
}

// ---------------------------------------------------------------------------

MeanfieldSystem meanfield_system(const PhysicalParams& params, const CouplingSet& c, const Vec6& means) {
    MeanfieldSystem sys;
    const double re = means(0) / kSqrt2;
    const double im = means(1) / kSqrt2;
    const double kappa = params.kappa();
    sys.Delta_pp = c.Delta_prime + c.g1 * means(2) + c.g2 * means(4);
    Mat6& S = sys.S;
    S(0, 0) = -kappa;
    S(0, 1) = -sys.Delta_pp;
    S(1, 0) = sys.Delta_pp;
    S(1, 1) = -kappa;
    const std::array<double, 2> g{c.g1, c.g2};
    const std::array<double, 2> w{params.omega1, params.omega2};
    const std::array<double, 2> damping{params.gamma1, params.gamma2};
    for (int j = 0; j < 2; ++j) {
        const int q = 2 + 2 * j, p = q + 1;
        S(0, q) = -kSqrt2 * g[j] * im;
        S(1, q) = kSqrt2 * g[j] * re;
        S(q, p) = w[j];
        S(p, q) = -w[j];
        S(p, p) = -damping[j];
        S(p, 0) = kSqrt2 * g[j] * re;
        S(p, 1) = kSqrt2 * g[j] * im;
    }
    const double cav = kappa * (2.0 * params.nbar_a + 1.0);
    sys.N.diagonal() << cav, cav, 0.0, params.gamma1 * (2.0 * params.nbar_1 + 1.0), 0.0,
        params.gamma2 * (2.0 * params.nbar_2 + 1.0);
    return sys;
}

Mat6 lyapunov_steady_state(const Mat6& S, const Mat6& N) {
    using Mat36 = Eigen::Matrix<double, 36, 36>;
    Mat36 K = Mat36::Zero();
    const Mat6 I = Mat6::Identity();
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            K.block<6, 6>(6 * i, 6 * j) += I(i, j) * S;  // I kron S
            K.block<6, 6>(6 * i, 6 * j) += S(i, j) * I;  // S kron I
        }
    }
    const Eigen::Matrix<double, 36, 1> rhs = -Eigen::Map<const Eigen::Matrix<double, 36, 1>>(N.data());
    const Eigen::Matrix<double, 36, 1> x = K.fullPivLu().solve(rhs);
    Mat6 C = Eigen::Map<const Mat6>(x.data());
    return 0.5 * (C + C.transpose());
}

std::vector<CovarianceState> meanfield_evolve(const PhysicalParams& params, const CouplingSet& couplings,
                                              const DriveSpec& drive, const MeanfieldOptions& options) {
    if (!(options.dtau > 0.0)) throw DomainError("integration step must be positive");
    if (!(options.tau_end >= 0.0)) throw DomainError("integration horizon must be non-negative");
    if (options.stride < 1) throw DomainError("sample stride must be >= 1");
    const double wb = params.omega_bar();
    const double s = 1.0 / wb;

    // Mean state: (q1, p1, q2, p2, Re a, Im a) plus covariance, all in tau units.
    struct State {
        Eigen::Matrix<double, 6, 1> m;
        Mat6 C;
    };
    const double E = drive.kind == DriveSpec::Kind::SingleTone ? drive.E : 0.0;
    auto rhs = [&](double tau, const State& x) {
        const double q1 = x.m(0), p1 = x.m(1), q2 = x.m(2), p2 = x.m(3), ar = x.m(4), ai = x.m(5);
        const double det = couplings.Delta_prime + couplings.g1 * q1 + couplings.g2 * q2;
        const double photons = ar * ar + ai * ai;
        const double t = tau * s;
        double dr = E, di = 0.0;
        if (drive.kind == DriveSpec::Kind::TwoTone) {
            dr = drive.E1 * std::cos(params.omega1 * t) + drive.E2 * std::cos(params.omega2 * t);
            di = -drive.E1 * std::sin(params.omega1 * t) + drive.E2 * std::sin(params.omega2 * t);
        }
        const double kappa = params.kappa();
        State d;
        d.m << params.omega1 * p1, -params.omega1 * q1 - params.gamma1 * p1 + couplings.g1 * photons,
            params.omega2 * p2, -params.omega2 * q2 - params.gamma2 * p2 + couplings.g2 * photons,
            -kappa * ar - det * ai + dr, det * ar - kappa * ai + di;
        d.m *= s;
        Vec6 means;
        means << kSqrt2 * ar, kSqrt2 * ai, q1, p1, q2, p2;
        const MeanfieldSystem sys = meanfield_system(params, couplings, means);
        d.C = (sys.S * x.C + x.C * sys.S.transpose() + sys.N) * s;
        return d;
    };
    auto axpy = [](const State& x, double a, const State& y) { return State{x.m + a * y.m, x.C + a * y.C}; };

    State x;
    const auto& init = options.initial;
    x.m << init.mean(2), init.mean(3), init.mean(4), init.mean(5), init.mean(0) / kSqrt2, init.mean(1) / kSqrt2;
    x.C = init.cov;
    const double tau0 = init.t * wb;
    auto snapshot = [&](double tau) {
        CovarianceState c;
        c.mean << kSqrt2 * x.m(4), kSqrt2 * x.m(5), x.m(0), x.m(1), x.m(2), x.m(3);
        c.cov = 0.5 * (x.C + x.C.transpose());
        c.t = tau * s;
        return c;
    };

    const double h = options.dtau;
    const auto steps = static_cast<std::uint64_t>(std::llround(options.tau_end / h));
    std::vector<CovarianceState> out;
    out.reserve(steps / options.stride + 2);
    out.push_back(snapshot(tau0));
    for (std::uint64_t n = 0; n < steps; ++n) {
        const double tau = tau0 + static_cast<double>(n) * h;
        const State k1 = rhs(tau, x);
        const State k2 = rhs(tau + 0.5 * h, axpy(x, 0.5 * h, k1));
        const State k3 = rhs(tau + 0.5 * h, axpy(x, 0.5 * h, k2));
        const State k4 = rhs(tau + h, axpy(x, h, k3));
        x.m += h / 6.0 * (k1.m + 2.0 * k2.m + 2.0 * k3.m + k4.m);
        x.C += h / 6.0 * (k1.C + 2.0 * k2.C + 2.0 * k3.C + k4.C);
        x.C = 0.5 * (x.C + x.C.transpose()).eval();
        const double tau_next = tau0 + static_cast<double>(n + 1) * h;
        if (!x.m.allFinite() || !x.C.allFinite()) {
            std::array<double, 6> st{};
            for (int i = 0; i < 6; ++i) st[i] = x.m(i);
            throw NonFiniteError(tau_next * s, st);
        }
        if ((n + 1) % options.stride == 0) out.push_back(snapshot(tau_next));
    }
    return out;
}

double error_metric(std::span<const double> t, std::span<const double> En_stochastic,
                    std::span<const double> En_meanfield, double t1, double t2) {
    if (t.size() != En_stochastic.size() || t.size() != En_meanfield.size())
        throw DomainError("error metric needs series on a common time grid");
    if (!(t2 > t1)) throw DomainError("error metric needs t2 > t1");
    double integral = 0.0, first = 0.0, last = 0.0;
    bool started = false;
    double prev_t = 0.0, prev_e = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t1 || t[i] > t2) continue;
        const double e = std::abs(En_stochastic[i] - En_meanfield[i]);
        if (started) {
            integral += 0.5 * (e + prev_e) * (t[i] - prev_t);
        } else {
            first = t[i];
            started = true;
        }
        prev_t = t[i];
        prev_e = e;
        last = t[i];
    }
    if (!started) throw DomainError("no samples inside the error-metric interval");
    if (last == first) return prev_e;
    return integral / (last - first);
}

}  // namespace twomem
