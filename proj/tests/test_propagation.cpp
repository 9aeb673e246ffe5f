#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfci/errors.hpp"
#include "mfci/grid.hpp"
#include "mfci/propagation.hpp"

using namespace mfci;

namespace {

constexpr double kPi = 3.14159265358979323846;

ComplexPlane random_plane(double R, int n, double z, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ComplexPlane p(R, n, n, z);
    for (auto& c : p.v) c = cplx(u(rng), u(rng));
    return p;
}

double band_rel_l2(const ComplexPlane& got, const ComplexPlane& want, double k) {
    auto sg = plane_dft(got), sw = plane_dft(want);
    double num = 0, den = 0;
    for (int my = 0; my < sw.Ny; ++my)
        for (int mx = 0; mx < sw.Nx; ++mx) {
            const double r2 = sw.rho1[mx] * sw.rho1[mx] + sw.rho2[my] * sw.rho2[my];
            if (r2 >= k * k) continue;
            num += std::norm(sg.at(mx, my) - sw.at(mx, my));
            den += std::norm(sw.at(mx, my));
        }
    return std::sqrt(num / den);
}

// band-limited one-way representation of a point source below the domain,
// synthesized as an explicit sum over the DFT mode grid: each propagating
// mode carries the Weyl weight i/(8 pi^2 kz), the transverse source offset
// phase, and the outgoing z factor exp(i kz (z_s - z)) valid for z < z_s.
struct OneWayField {
    double R, k, xs, ys, zs;
    int n;
    double h;
    std::vector<double> rho;
    std::vector<cplx> amp;  // per-mode constant, zero off band
    std::vector<double> kz;

    OneWayField(double R_, int n_, double k_, double xs_, double ys_, double zs_)
        : R(R_), k(k_), xs(xs_), ys(ys_), zs(zs_), n(n_), h(2 * R_ / (n_ - 1)) {
        rho.resize(n);
        for (int m = 0; m < n; ++m) {
            const int folded = (m <= n / 2) ? m : m - n;
            rho[m] = 2.0 * kPi * folded / (n * h);
        }
        amp.assign(std::size_t(n) * n, 0);
        kz.assign(std::size_t(n) * n, 0);
        for (int my = 0; my < n; ++my)
            for (int mx = 0; mx < n; ++mx) {
                const double r2 = rho[mx] * rho[mx] + rho[my] * rho[my];
                if (r2 >= k * k) continue;
                const double kzm = std::sqrt(k * k - r2);
                kz[std::size_t(my) * n + mx] = kzm;
                amp[std::size_t(my) * n + mx] = cplx(0, 1) / (8 * kPi * kPi * kzm) *
                                                std::polar(1.0, -(rho[mx] * xs + rho[my] * ys));
            }
    }

    // dz = 0 samples the field, dz = 1 its z-derivative
    ComplexPlane plane(double z, int dz = 0) const {
        ComplexPlane p(R, n, n, z);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                const double x = -R + ix * h, y = -R + iy * h;
                cplx s = 0;
                for (int my = 0; my < n; ++my)
                    for (int mx = 0; mx < n; ++mx) {
                        const cplx a = amp[std::size_t(my) * n + mx];
                        if (a == cplx(0)) continue;
                        const double kzm = kz[std::size_t(my) * n + mx];
                        cplx term = a * std::polar(1.0, kzm * (zs - z) + rho[mx] * x + rho[my] * y);
                        if (dz) term *= cplx(0, -kzm);
                        s += term;
                    }
                p.at(ix, iy) = s;
            }
        return p;
    }
};

}  // namespace

TEST_SUITE_BEGIN("propagation");

TEST_CASE("unitary transform round trip") {
    auto p = random_plane(5.0, 51, -2.0, 7);
    auto s = plane_dft(p);
    auto back = inverse_dft(s);
    double emax = 0, pnorm = 0, snorm = 0;
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        emax = std::max(emax, std::abs(back.v[i] - p.v[i]));
        pnorm += std::norm(p.v[i]);
        snorm += std::norm(s.c[i]);
    }
    CHECK(emax < 1e-12);
    CHECK(snorm == doctest::Approx(pnorm).epsilon(1e-12));  // unitarity
    CHECK(back.z == p.z);
    CHECK(back.R == p.R);
}

TEST_CASE("constant plane concentrates at zero frequency") {
    ComplexPlane p(5.0, 21, 21, -2.0);
    for (auto& c : p.v) c = cplx(2.0, -1.0);
    auto s = plane_dft(p);
    for (int my = 0; my < 21; ++my)
        for (int mx = 0; mx < 21; ++mx) {
            if (mx == 0 && my == 0)
                CHECK(std::abs(s.at(0, 0) - cplx(2.0, -1.0) * 21.0) < 1e-12);
            else
                CHECK(std::abs(s.at(mx, my)) < 1e-12);
        }
}

TEST_CASE("on-grid harmonic produces a single mode") {
    const int n = 32;
    const double R = 5.0, h = 2 * R / (n - 1);
    const int m0 = 5, m1 = 29;  // m1 folds to -3
    const double r1 = 2 * kPi * m0 / (n * h), r2 = 2 * kPi * (m1 - n) / (n * h);
    ComplexPlane p(R, n, n, 0.0);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            p.at(ix, iy) = std::polar(1.0, r1 * (-R + ix * h) + r2 * (-R + iy * h));
    auto s = plane_dft(p);
    for (int my = 0; my < n; ++my)
        for (int mx = 0; mx < n; ++mx) {
            if (mx == m0 && my == m1) {
                CHECK(std::abs(s.at(mx, my)) == doctest::Approx(n).epsilon(1e-12));
                CHECK(s.rho1[mx] == doctest::Approx(r1));
                CHECK(s.rho2[my] == doctest::Approx(r2));
            } else {
                CHECK(std::abs(s.at(mx, my)) < 1e-10);
            }
        }
}

TEST_CASE("zero far field propagates to zero") {
    ComplexPlane p(5.0, 51, 51, -14.0);
    auto near = propagate_to_near(p, 8.0, 14.0, 2.0);
    for (const auto& c : near.v) CHECK(std::abs(c) == 0.0);
    CHECK(near.z == doctest::Approx(-2.0));
}

TEST_CASE("output spectrum is supported inside the propagating disk") {
    const double k = 6.0;
    auto p = random_plane(5.0, 51, -14.0, 11);
    auto near = propagate_to_near(p, k, 14.0, 2.0);
    auto s = plane_dft(near);
    for (int my = 0; my < s.Ny; ++my)
        for (int mx = 0; mx < s.Nx; ++mx) {
            const double r2 = s.rho1[mx] * s.rho1[mx] + s.rho2[my] * s.rho2[my];
            if (r2 >= k * k) CHECK(std::abs(s.at(mx, my)) < 1e-12);
        }
}

TEST_CASE("zero distance is the identity on the band") {
    const double k = 7.0;
    auto p = random_plane(5.0, 41, -2.0, 13);
    auto bp = propagate_plane(p, k, 0.0);   // band projection
    auto bp2 = propagate_plane(bp, k, 0.0);
    double emax = 0;
    for (std::size_t i = 0; i < bp.v.size(); ++i)
        emax = std::max(emax, std::abs(bp2.v[i] - bp.v[i]));
    CHECK(emax < 1e-10);
    CHECK(band_rel_l2(bp, p, k) < 1e-10);
}

TEST_CASE("propagation composes as a semigroup") {
    const double k = 8.0;
    auto p = random_plane(5.0, 41, -14.0, 17);
    auto two_step = propagate_plane(propagate_plane(p, k, 4.5), k, 7.5);
    auto one_step = propagate_plane(p, k, 12.0);
    double emax = 0;
    for (std::size_t i = 0; i < p.v.size(); ++i)
        emax = std::max(emax, std::abs(two_step.v[i] - one_step.v[i]));
    CHECK(emax < 1e-10);
    CHECK(two_step.z == doctest::Approx(one_step.z));
}

TEST_CASE("band-limited norm is preserved") {
    const double k = 8.0;
    auto p = random_plane(5.0, 41, -14.0, 19);
    auto moved = propagate_plane(p, k, 9.0);
    auto s0 = plane_dft(p), s1 = plane_dft(moved);
    double n0 = 0, n1 = 0;
    for (int my = 0; my < s0.Ny; ++my)
        for (int mx = 0; mx < s0.Nx; ++mx) {
            const double r2 = s0.rho1[mx] * s0.rho1[mx] + s0.rho2[my] * s0.rho2[my];
            if (r2 >= k * k) continue;
            n0 += std::norm(s0.at(mx, my));
            n1 += std::norm(s1.at(mx, my));
        }
    CHECK(n1 == doctest::Approx(n0).epsilon(1e-12));
}

TEST_CASE("far plane must lie beyond the near plane") {
    auto p = random_plane(5.0, 21, -2.0, 23);
    CHECK_THROWS_AS(propagate_to_near(p, 8.0, 2.0, 2.0), geometry_error);
    CHECK_THROWS_AS(propagate_to_near(p, 8.0, 1.0, 2.0), geometry_error);
}

TEST_CASE("point-source oracle travels far to near") {
    OneWayField field(5.0, 51, 8.0, 0.1, 0.0, -9.0);
    auto far = field.plane(-14.0);
    auto want = field.plane(-2.0);
    auto got = propagate_to_near(far, 8.0, 14.0, 2.0);
    CHECK(band_rel_l2(got, want, 8.0) < 0.05);  // measured ~3e-15
}

TEST_CASE("spectral z-derivative matches the oracle field") {
    const double k = 8.0;
    OneWayField field(5.0, 51, k, 0.1, 0.0, -9.0);
    auto near = field.plane(-2.0);

    auto got = dz_spectral(near, k);
    auto want = field.plane(-2.0, 1);
    CHECK(band_rel_l2(got, want, k) < 1e-10);

    // centered finite difference of analytically sampled neighbors
    const double hz = 0.02;
    auto up = field.plane(-2.0 + hz), dn = field.plane(-2.0 - hz);
    ComplexPlane fd(5.0, 51, 51, -2.0);
    for (std::size_t i = 0; i < fd.v.size(); ++i) fd.v[i] = (up.v[i] - dn.v[i]) / (2 * hz);
    CHECK(band_rel_l2(got, fd, k) < 0.05);

    // normal-incidence mode picks up exactly -ik
    ComplexPlane mode(5.0, 21, 21, -2.0);
    for (auto& c : mode.v) c = 1.0;
    auto dzm = dz_spectral(mode, k);
    for (std::size_t i = 0; i < mode.v.size(); ++i)
        CHECK(std::abs(dzm.v[i] - cplx(0, -k)) < 1e-12);

    ComplexPlane zero(5.0, 21, 21, -2.0);
    auto dzz = dz_spectral(zero, k);
    for (const auto& c : dzz.v) CHECK(std::abs(c) == 0.0);
}

TEST_SUITE_END();
