#pragma once

// Independent reference implementations used only by the tests. They work in
// 50-digit arithmetic straight from the closed forms in absolute coordinates,
// sharing no code with the library kernels.

#include <array>
#include <cmath>
#include <complex>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "twomem/model.hpp"

namespace oracle {

using mp = boost::multiprecision::cpp_bin_float_50;

inline const mp kPi = boost::math::constants::pi<mp>();
inline const mp kHbar("1.054571817e-34");
inline const mp kLight("299792458");

struct Slab {
    mp R, phi;
};

inline Slab slab_reflectivity(const twomem::PhysicalParams& p) {
    if (p.reflectivity_override) return {mp(p.reflectivity_override->R), mp(p.reflectivity_override->phi)};
    const mp n = p.n_refr;
    const mp arg = 2 * kPi / mp(p.lambda) * n * mp(p.Lz);
    const mp num = (n * n - 1) * sin(arg);
    const mp den_re = (n * n + 1) * sin(arg);
    const mp den_im = 2 * n * cos(arg);
    const mp mod2 = den_re * den_re + den_im * den_im;
    // r = num / (den_re + i den_im) = num (den_re - i den_im) / |den|^2
    const mp re = num * den_re / mod2;
    const mp im = -num * den_im / mod2;
    Slab s;
    s.R = re * re + im * im;
    s.phi = s.R == 0 ? mp(0) : atan2(im, re);
    return s;
}

inline mp chi(double Lx, double Ly, double Lz, double rho, double omega) {
    const mp m = mp(Lx) * mp(Ly) * mp(Lz) * mp(rho) / 4;
    return sqrt(kHbar / (m * mp(omega)));
}

struct Cavity {
    Slab slab;
    mp k, chi1, chi2, c_over_L;
    int l = 0;

    explicit Cavity(const twomem::PhysicalParams& p)
        : slab(slab_reflectivity(p)),
          k(2 * kPi / mp(p.lambda)),
          chi1(chi(p.Lx1, p.Ly1, p.Lz, p.rho, p.omega1)),
          chi2(chi(p.Lx2, p.Ly2, p.Lz, p.rho, p.omega2)),
          c_over_L(kLight / mp(p.L)),
          l(p.branch_l) {}

    mp F(const mp& Q1, const mp& Q2, const mp& q1, const mp& q2) const {
        const mp t1 = Q1 + q1 * chi1, t2 = Q2 + q2 * chi2;
        const mp& R = slab.R;
        const mp D = k * (t2 - t1) + slab.phi;
        return -2 * sqrt(R) * cos(k * (t1 + t2)) * sin(D) / sqrt(1 + R * R - 2 * R * cos(2 * D));
    }

    mp theta(const mp& Q1, const mp& Q2, const mp& q1, const mp& q2) const {
        const mp t1 = Q1 + q1 * chi1, t2 = Q2 + q2 * chi2;
        const mp& R = slab.R;
        const mp D = k * (t2 - t1) + slab.phi;
        return asin(R * sin(2 * D) / sqrt(1 + R * R - 2 * R * cos(2 * D)));
    }

    mp shift(const mp& Q1, const mp& Q2, const mp& q1, const mp& q2) const {
        const mp parity = (l % 2 == 0) ? 1 : -1;
        return c_over_L * (parity * asin(F(Q1, Q2, q1, q2)) - theta(Q1, Q2, q1, q2) - 2 * slab.phi);
    }

    /// -d(shift)/dq_j by central differences with one Richardson step.
    std::array<mp, 2> gradient(const mp& Q1, const mp& Q2, const mp& q1, const mp& q2, const mp& h) const {
        auto central = [&](int j, const mp& step) {
            if (j == 0) return -(shift(Q1, Q2, q1 + step, q2) - shift(Q1, Q2, q1 - step, q2)) / (2 * step);
            return -(shift(Q1, Q2, q1, q2 + step) - shift(Q1, Q2, q1, q2 - step)) / (2 * step);
        };
        std::array<mp, 2> out;
        for (int j = 0; j < 2; ++j) out[j] = (4 * central(j, h / 2) - central(j, h)) / 3;
        return out;
    }

    /// Second partials of the shift at q = 0 by central differences with one Richardson step.
    struct Second {
        mp d11, d22, d12;
    };
    Second second(const mp& Q1, const mp& Q2, const mp& h) const {
        auto at = [&](const mp& step) {
            const mp f0 = shift(Q1, Q2, 0, 0);
            Second s;
            s.d11 = (shift(Q1, Q2, step, 0) - 2 * f0 + shift(Q1, Q2, -step, 0)) / (step * step);
            s.d22 = (shift(Q1, Q2, 0, step) - 2 * f0 + shift(Q1, Q2, 0, -step)) / (step * step);
            s.d12 = (shift(Q1, Q2, step, step) - shift(Q1, Q2, step, -step) - shift(Q1, Q2, -step, step) +
                     shift(Q1, Q2, -step, -step)) /
                    (4 * step * step);
            return s;
        };
        const Second c = at(h), f = at(h / 2);
        return {(4 * f.d11 - c.d11) / 3, (4 * f.d22 - c.d22) / 3, (4 * f.d12 - c.d12) / 3};
    }
};

inline double to_double(const mp& v) { return static_cast<double>(v); }

}  // namespace oracle
