#pragma once

#include <array>
#include <optional>
#include <string>

namespace twomem {

/// Membrane amplitude reflectivity r = sqrt(R) e^{i phi}.
struct Reflectivity {
    double R = 0.0;    ///< |r|^2
    double phi = 0.0;  ///< arg(r), rad
};

/// Static constants of the two-membrane cavity. Frequencies and rates are
/// angular (rad/s); lengths in metres; density in kg/m^3.
struct PhysicalParams {
    double omega1 = 0.0;
    double omega2 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double kappa_in = 0.0;
    double kappa_ex = 0.0;
    /// Drive detuning Delta = omega_d - omega_c relative to the bare cavity.
    double Delta = 0.0;
    double n_refr = 1.0;
    double L = 0.0;
    double lambda = 0.0;
    double Lz = 0.0;
    double Lx1 = 0.0, Ly1 = 0.0;
    double Lx2 = 0.0, Ly2 = 0.0;
    double rho = 0.0;
    /// Longitudinal branch index l; only its parity enters the shift.
    int branch_l = 0;
    double nbar_a = 0.0, nbar_1 = 0.0, nbar_2 = 0.0;
    /// Replaces the homogeneous-slab reflectivity (patterned membranes).
    std::optional<Reflectivity> reflectivity_override;

    double kappa() const noexcept { return 2.0 * kappa_in + kappa_ex; }
    double omega_bar() const noexcept { return 0.5 * (omega1 + omega2); }
    double mass1() const noexcept { return Lx1 * Ly1 * Lz * rho / 4.0; }
    double mass2() const noexcept { return Lx2 * Ly2 * Lz * rho / 4.0; }
    double chi_zpf1() const;
    double chi_zpf2() const;
    double wave_number() const;
    /// Laser angular frequency used for the power-to-rate conversion.
    double omega_laser() const;
    /// Override when present, otherwise the thin-slab formula.
    Reflectivity reflectivity() const;
    /// (-1)^l
    double branch_sign() const noexcept { return (branch_l % 2 == 0) ? 1.0 : -1.0; }

    /// Throws DomainError on non-positive rates/lengths or R outside [0, 1).
    void validate() const;

    /// Stable text form of every field, used for digests and provenance.
    std::string canonical() const;
    /// Hex SHA-256 of canonical().
    std::string digest() const;

    /// Reference two-membrane setup: omega_bar/2pi = 235.5 kHz, delta/2pi = 1 kHz, gamma/2pi = 1 and 10 Hz,
    /// kappa_in/2pi = 50 kHz, kappa_ex/2pi = 100 kHz, Delta = omega_bar,
    /// n = 2.17, L = 9 cm, lambda = 1064 nm, 104 nm SiN membranes.
    static PhysicalParams reference();
};

/// Frequency pair omega_{1,2} = omega_bar -/+ delta/2.
void set_mechanical_frequencies(PhysicalParams& params, double omega_bar, double delta);

/// Complex reflectivity of a lossless dielectric slab of index n and
/// thickness Lz at wavelength lambda.
Reflectivity membrane_reflectivity(double n_refr, double Lz, double lambda);

/// sqrt(hbar / (m omega)).
double zero_point_amplitude(double mass, double omega);

/// Intermediates of the interference shift at absolute coordinates
/// qt_j = Q_j + q_j chi_zpf_j.
struct InterferenceKernel {
    double F = 0.0;
    double theta = 0.0;
    std::array<double, 8> f{};  ///< f1..f8 stored at f[0]..f[7]
    double qt1 = 0.0;
    double qt2 = 0.0;
};

/// Linear, quadratic and cross couplings at a membrane placement.
///
/// Sign convention: g1, g2 are -d(delta_omega)/dq_j (radiation-pressure force
/// per photon); g12, g22, gt are +d^2(delta_omega)/dq_j dq_k. The mechanical
/// force to second order is therefore g_j - g_j2 q_j - gt q_{3-j}.
struct CouplingSet {
    double delta_omega0 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    double g12 = 0.0;
    double g22 = 0.0;
    double gt = 0.0;
    double Delta_prime = 0.0;
    /// gt estimated through d/dq2(dL1) and d/dq1(dL2) respectively.
    double gt_12 = 0.0;
    double gt_21 = 0.0;
    /// False when the two mixed-partial orders disagree beyond 1e-6 relative.
    bool mixed_symmetric = true;
};

struct ShiftGradient {
    double L1 = 0.0;
    double L2 = 0.0;
};

struct ShiftAndGradient {
    double shift = 0.0;
    ShiftGradient gradient;
};

/// Interference model bound to fixed equilibrium positions (Q1, Q2).
///
/// The static phases k Q_j are kept apart from the displacement phases
/// k chi_j q_j; trigonometric terms are evaluated by angle addition so small
/// displacements keep full relative precision.
class Placement {
public:
    Placement(const PhysicalParams& params, double Q1, double Q2);

    double Q1() const noexcept { return Q1_; }
    double Q2() const noexcept { return Q2_; }
    const Reflectivity& reflectivity() const noexcept { return refl_; }
    double chi1() const noexcept { return chi1_; }
    double chi2() const noexcept { return chi2_; }

    InterferenceKernel kernel(double q1, double q2) const;
    double shift(double q1, double q2) const;
    /// delta_omega(q1, q2) - delta_omega(0, 0) evaluated in difference form,
    /// accurate relative to the change itself rather than to c/L.
    double shift_change(double q1, double q2) const;
    ShiftGradient gradient(double q1, double q2) const;
    ShiftAndGradient evaluate(double q1, double q2) const;

private:
    struct SinCos {
        double s = 0.0;
        double c = 1.0;
    };
    struct Terms;
    Terms terms(double q1, double q2, bool with_gradient_terms) const;
    static SinCos rotate(const SinCos& base, double increment);
    /// rotate(base, increment) - base without cancellation.
    static SinCos rotation_delta(const SinCos& base, double increment);

    double Q1_, Q2_;
    Reflectivity refl_;
    double sqrtR_;
    double k_;
    double chi1_, chi2_;
    double c_over_L_;
    double parity_;
    // angle bases: k(Q1+Q2), k(Q2-Q1)+phi, 2[k(Q2-Q1)+phi], 4[...],
    // 2kQ1-phi, 2kQ2+phi, 2k(Q1-2Q2)-3phi, 2k(Q2-2Q1)+3phi
    SinCos sum_, diff_, diff2_, diff4_, a1_, a2_, a3_, a4_;
};

InterferenceKernel interference_kernel(const PhysicalParams& params, double Q1, double Q2, double q1, double q2);

/// delta_omega(Q1, Q2, q1, q2) in rad/s.
double cavity_shift(const PhysicalParams& params, double Q1, double Q2, double q1, double q2);

/// Closed-form (L1, L2) = -d(delta_omega)/dq_j in rad/s per unit q.
ShiftGradient coupling_gradient(const PhysicalParams& params, double Q1, double Q2, double q1, double q2);

struct SecondDerivativeOptions {
    /// Dimensionless displacement step for the central differences of L_j.
    /// The natural scale of the shift is 1/(k chi) ~ 3e8, so 1e4 keeps the
    /// truncation error negligible while the increment of L_j stays far above
    /// double rounding.
    double step = 1.0e4;
    bool richardson = true;
};

CouplingSet coupling_coefficients(const PhysicalParams& params, double Q1, double Q2,
                                  const SecondDerivativeOptions& options = {});

/// Returns params with Delta chosen so that Delta - delta_omega0(Q1, Q2) equals
/// the requested detuning from the membrane-shifted resonance.
PhysicalParams with_shifted_detuning(PhysicalParams params, double Q1, double Q2, double Delta_prime);

}  // namespace twomem
